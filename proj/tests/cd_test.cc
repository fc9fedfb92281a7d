/*
 * Copyright 2026 The cdlab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>

#include <gtest/gtest.h>

#include "cdlab/cd/cd.h"
#include "cdlab/errors.h"
#include "cdlab/gradcheck.h"
#include "cdlab/ops.h"
#include "random_nets.h"

namespace cdlab::cd {
namespace {

using net::LayerKind;
using net::Mode;

CdPair Pair(std::vector<double> b, std::vector<double> g) {
  const int64_t n = static_cast<int64_t>(b.size());
  return {Tensor({1, n}, std::move(b)), Tensor({1, n}, std::move(g))};
}

std::vector<double> B(const CdPair& p) { return p.beta.value().ToVector(); }
std::vector<double> G(const CdPair& p) { return p.gamma.value().ToVector(); }

TEST(CdInitTest, Masks) {
  const Tensor x({1, 3}, {1, 2, 3});
  CdPair p = CdInit(x, Tensor::Vector({1, 0, 0}));
  EXPECT_EQ(B(p), (std::vector<double>{1, 0, 0}));
  EXPECT_EQ(G(p), (std::vector<double>{0, 2, 3}));
  p = CdInit(x, Tensor::Vector({1, 1, 1}));
  EXPECT_EQ(B(p), (std::vector<double>{1, 2, 3}));
  EXPECT_TRUE(p.gamma.value().AllZero());
  p = CdInit(x, Tensor::Vector({0, 0, 0}));
  EXPECT_TRUE(p.beta.value().AllZero());
  EXPECT_EQ(G(p), (std::vector<double>{1, 2, 3}));
  EXPECT_THROW(CdInit(x, Tensor::Vector({1, 0})), ShapeError);
}

TEST(CdLinearTest, ProportionalBiasSplit) {
  const CdPair p = CdLinear(Tensor({1, 1}, {2}), Tensor::Vector({1}), Pair({1}, {3}));
  EXPECT_DOUBLE_EQ(B(p)[0], 2.25);
  EXPECT_DOUBLE_EQ(G(p)[0], 6.75);
}

TEST(CdLinearTest, ZeroGammaTakesWholeBias) {
  const Tensor w({2, 2}, {1, -2, 0.5, 3});
  const CdPair p = CdLinear(w, Tensor::Vector({0.7, -0.3}), Pair({1, 2}, {0, 0}));
  EXPECT_EQ(B(p), (std::vector<double>{1 - 4 + 0.7, 0.5 + 6 - 0.3}));
  EXPECT_TRUE(p.gamma.value().AllZero());
}

TEST(CdLinearTest, BothSidesZeroLeavesBiasWithGamma) {
  const CdPair p = CdLinear(Tensor({2, 2}, {0, 0, 0, 0}), Tensor::Vector({1, -2}), Pair({1, 2}, {3, 4}));
  EXPECT_EQ(B(p), (std::vector<double>{0, 0}));
  EXPECT_EQ(G(p), (std::vector<double>{1, -2}));
  const CdPair s = CdNonlinear(LayerKind::kSigmoid, Pair({0, 0}, {0, 0}));
  EXPECT_EQ(B(s), (std::vector<double>{0, 0}));
  EXPECT_EQ(G(s), (std::vector<double>{0.5, 0.5}));
}

TEST(CdLinearTest, ZeroBiasIsLinear) {
  const Tensor w({2, 2}, {1, -2, 0.5, 3});
  const CdPair p = CdLinear(w, Tensor::Vector({0, 0}), Pair({1, 2}, {-1, 4}));
  EXPECT_EQ(B(p), (std::vector<double>{-3, 6.5}));
  EXPECT_EQ(G(p), (std::vector<double>{-9, 11.5}));
}

TEST(CdLinearTest, DegenerateUnitSplitsEvenly) {
  // Unit 0 has zero pre-activation on both sides while neither side is zero.
  const Tensor w({2, 2}, {0, 0, 1, 1});
  const CdPair p = CdLinear(w, Tensor::Vector({2, 0}), Pair({1, 0}, {0, 1}));
  EXPECT_EQ(B(p)[0], 1.0);
  EXPECT_EQ(G(p)[0], 1.0);
}

TEST(CdReluTest, Examples) {
  CdPair p = CdRelu(Pair({-1}, {3}));
  EXPECT_EQ(B(p)[0], 0.0);
  EXPECT_EQ(G(p)[0], 2.0);
  p = CdRelu(Pair({2}, {-5}));
  EXPECT_EQ(B(p)[0], 2.0);
  EXPECT_EQ(G(p)[0], -2.0);
  p = CdRelu(Pair({-4, 5}, {0, 0}));
  EXPECT_EQ(B(p), (std::vector<double>{0, 5}));
  EXPECT_TRUE(p.gamma.value().AllZero());
}

TEST(CdNonlinearTest, Examples) {
  for (LayerKind k : {LayerKind::kSigmoid, LayerKind::kTanh}) {
    auto sigma = [k](double v) { return k == LayerKind::kSigmoid ? 1 / (1 + std::exp(-v)) : std::tanh(v); };
    CdPair p = CdNonlinear(k, Pair({0}, {0.8}));
    EXPECT_EQ(B(p)[0], 0.0);
    EXPECT_NEAR(G(p)[0], sigma(0.8), 1e-15);
    const std::vector<double> b{0.3, -1.1}, g{2.0, 0.4};
    p = CdNonlinear(k, Pair(b, g));
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(B(p)[i] + G(p)[i], sigma(b[i] + g[i]), 1e-15);
    p = CdNonlinear(k, Pair({1.0}, {0.0}));
    EXPECT_EQ(B(p)[0], sigma(1.0));
    EXPECT_EQ(G(p)[0], 0.0);
  }
  const CdPair t = CdNonlinear(LayerKind::kTanh, Pair({1.0}, {0.0}));
  EXPECT_NEAR(B(t)[0], 0.7616, 1e-4);
}

TEST(CdNonlinearTest, SymmetricAverageAwayFromZeroRows) {
  const double b = 0.6, g = -1.3;
  const CdPair p = CdNonlinear(LayerKind::kSigmoid, Pair({b}, {g}));
  auto s = [](double v) { return 1 / (1 + std::exp(-v)); };
  EXPECT_NEAR(B(p)[0], 0.5 * ((s(b) - 0.5) + (s(b + g) - s(g))), 1e-15);
}

TEST(CdDropoutTest, Modes) {
  const CdPair in = Pair({1, 2, 3, 4}, {-1, 0.5, 2, 0});
  CdPair p = CdDropout(in, 0.5, Mode::kEval, 3, 0);
  EXPECT_EQ(B(p), B(in));
  p = CdDropout(in, 0.0, Mode::kTrain, 3, 0);
  EXPECT_EQ(G(p), G(in));
  p = CdDropout(in, 0.5, Mode::kTrain, 3, 2);
  const Tensor mask = net::DropoutMask({1, 4}, 0.5, 3, 2);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(B(p)[i] + G(p)[i], (B(in)[i] + G(in)[i]) * mask[i]);
  }
}

TEST(CdMaxPoolTest, RoutesByTotal) {
  Rng rng = MakeRng(1);
  const CdPair win{Tensor({1, 1, 2, 2}, {1, 0, 0, 0}), Tensor({1, 1, 2, 2}, {0, 3, 0, 0})};
  const CdPair r = CdMaxPool(win, 2, 2);
  EXPECT_EQ(B(r)[0], 0.0);
  EXPECT_EQ(G(r)[0], 3.0);
  const Tensor beta = UniformTensor({1, 2, 4, 4}, -1, 1, rng);
  const CdPair z = CdMaxPool({beta, Tensor::Zeros(beta.shape())}, 2, 2);
  EXPECT_TRUE(BitEqual(z.beta.value(), MaxPool2d(beta, 2, 2).value()));
  EXPECT_TRUE(z.gamma.value().AllZero());
}

net::Network Lstm(uint64_t seed, int64_t steps = 4) {
  net::Architecture arch{{steps, 3}, 2, {}};
  net::LayerDesc l{LayerKind::kLstm};
  l.hidden = 5;
  arch.layers = {l, {LayerKind::kLinear, 2}};
  return net::InitRandom(arch, seed);
}

TEST(CdLstmTest, EmptyFullAndOneStep) {
  Rng rng = MakeRng(4);
  const net::Network net = Lstm(5);
  const Tensor x = UniformTensor({1, 4, 3}, -1, 1, rng);
  const auto params = net::ConstantParams(net);
  NoRecordingScope off;
  const Tensor h = net::Forward(net, x)[0];
  CdPair empty = CdLayer(net.layers[0], params[0], CdInit(x, Tensor::Zeros({4, 3})), Mode::kEval, 0, 0);
  EXPECT_TRUE(empty.beta.value().AllZero());
  CdPair full = CdLayer(net.layers[0], params[0], CdInit(x, Tensor::Full({4, 3}, 1)), Mode::kEval, 0, 0);
  EXPECT_TRUE(BitEqual(full.beta.value(), h));
  EXPECT_TRUE(full.gamma.value().AllZero());

  const net::Network one = Lstm(6, 1);
  const Tensor x1 = UniformTensor({1, 1, 3}, -1, 1, rng);
  const Tensor h1 = net::Forward(one, x1)[0];
  const CdPair p = CdLayer(one.layers[0], net::ConstantParams(one)[0],
                           CdInit(x1, Tensor({1, 3}, {1, 0, 1})), Mode::kEval, 0, 0);
  const Tensor sum = Add(p.beta, p.gamma).value();
  for (int64_t u = 0; u < 5; ++u) EXPECT_NEAR(sum[u], h1[u], 1e-6 * std::max(1.0, std::abs(h1[u])));
}

TEST(CdLstmTest, TraceAdditiveAtEveryStep) {
  Rng rng = MakeRng(8);
  const net::Network net = Lstm(9, 6);
  const Tensor x = UniformTensor({1, 6, 3}, -1, 1, rng);
  std::vector<std::pair<CdPair, CdPair>> trace;
  NoRecordingScope off;
  CdLstm(net.layers[0], net::ConstantParams(net)[0], CdInit(x, testing::RandomMask({6, 3}, rng)),
         &trace);
  ASSERT_EQ(trace.size(), 6u);
  for (int64_t t = 1; t <= 6; ++t) {
    net::Network prefix = Lstm(9, t);
    const Tensor xt = Narrow(x, 1, 0, t).value();
    const Tensor h = net::Forward(prefix, xt)[0];
    const Tensor sum = Add(trace[t - 1].first.beta, trace[t - 1].first.gamma).value();
    EXPECT_LE(MaxAbsDiff(sum, h), 1e-12) << t;
  }
}

TEST(CdScoreTest, FullAndEmptyMaskIdentities) {
  Rng rng = MakeRng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const net::Network net = testing::RandomNetwork(rng);
    Shape s = net.input_shape;
    const Tensor x = UniformTensor(s, -1, 1, rng);
    const Tensor logits = net::Logits(net, net::AddBatchAxis(x));
    for (int c = 0; c < net.num_classes; ++c) {
      const CdScore full = ComputeCdScore(net, x, Tensor::Full(s, 1.0), c);
      EXPECT_EQ(full.beta_logit, logits[c]);
      EXPECT_EQ(full.gamma_logit, 0.0);
      const CdScore empty = ComputeCdScore(net, x, Tensor::Zeros(s), c);
      EXPECT_EQ(empty.beta_logit, 0.0);
    }
  }
}

TEST(CdScoreTest, BiasFreeLinearEqualsMaskedResponse) {
  Rng rng = MakeRng(11);
  const Tensor w1 = UniformTensor({4, 6}, -1, 1, rng);
  const Tensor w2 = UniformTensor({3, 4}, -1, 1, rng);
  const net::Network net{{6}, 3,
                         {{LayerKind::kLinear, {w1, Tensor::Zeros({4})}},
                          {LayerKind::kLinear, {w2, Tensor::Zeros({3})}}}};
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = UniformTensor({6}, -1, 1, rng);
    const Tensor m = testing::RandomMask({6}, rng);
    std::vector<double> masked(6);
    for (int i = 0; i < 6; ++i) masked[i] = m[i] * x[i];
    for (int c = 0; c < 3; ++c) {
      double want = 0;
      for (int j = 0; j < 4; ++j) {
        double hj = 0;
        for (int i = 0; i < 6; ++i) hj += w1[j * 6 + i] * masked[i];
        want += w2[c * 4 + j] * hj;
      }
      EXPECT_NEAR(ComputeCdScore(net, x, m, c).beta_logit, want, 1e-12);
    }
  }
}

TEST(CdScoreTest, AdditiveAtEveryLayerOnConvNets) {
  Rng rng = MakeRng(12);
  net::Architecture arch{{2, 7, 7}, 3,
                         {{LayerKind::kConv2d, 3, 3}, {LayerKind::kRelu}, {LayerKind::kMaxPool2d},
                          {LayerKind::kFlatten}, {LayerKind::kLinear, 3}}};
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const net::Network net = net::InitRandom(arch, rng());
    const Tensor x = UniformTensor({1, 2, 7, 7}, -1, 1, rng);
    const auto acts = net::Forward(net, x);
    NoRecordingScope off;
    const auto pairs = CdForward(net, net::ConstantParams(net), x, testing::RandomMask({2, 7, 7}, rng));
    for (size_t i = 0; i < acts.size(); ++i) {
      const Tensor sum = Add(pairs[i].beta, pairs[i].gamma).value();
      double scale = 1e-12;
      for (double v : acts[i].data()) scale = std::max(scale, std::abs(v));
      worst = std::max(worst, MaxAbsDiff(sum, acts[i]) / scale);
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(CdScoreTest, RejectsBadClassAndShape) {
  Rng rng = MakeRng(13);
  const net::Network net = Lstm(1);
  EXPECT_THROW(ComputeCdScore(net, Tensor::Zeros({4, 3}), Tensor::Zeros({4, 3}), 2), InvalidArgument);
  EXPECT_THROW(ComputeCdScore(net, Tensor::Zeros({4, 3}), Tensor::Zeros({3, 3}), 0), ShapeError);
}

TEST(CdScoreTest, CostIsBoundedByForwardPasses) {
  Rng rng = MakeRng(14);
  net::Architecture arch{{2, 8, 8}, 3,
                         {{LayerKind::kConv2d, 4, 3}, {LayerKind::kRelu}, {LayerKind::kMaxPool2d},
                          {LayerKind::kFlatten}, {LayerKind::kLinear, 8}, {LayerKind::kTanh},
                          {LayerKind::kLinear, 3}}};
  const net::Network net = net::InitRandom(arch, 1);
  const Tensor x = UniformTensor({2, 8, 8}, -1, 1, rng);
  const Tensor mask = testing::RandomMask({2, 8, 8}, rng);
  AllocStats& stats = ThreadAllocStats();
  const AllocStats before = stats;
  net::Logits(net, net::AddBatchAxis(x));
  const int64_t forward = stats.doubles - before.doubles;
  const AllocStats mid = stats;
  ComputeCdScore(net, x, mask, 0);
  const int64_t cd = stats.doubles - mid.doubles;
  EXPECT_LE(cd, 16 * forward) << cd << " vs " << forward;
}

net::Network ReluSum() {
  return {{2}, 1,
          {{LayerKind::kLinear, {Tensor({1, 2}, {1, 1}), Tensor::Zeros({1})}}, {LayerKind::kRelu}}};
}

TEST(InteractionTest, ReluOfSum) {
  const net::Network net = ReluSum();
  const Tensor a = Tensor::Vector({1, 0}), b = Tensor::Vector({0, 1});
  EXPECT_EQ(ComputeCdScore(net, Tensor::Vector({1, 1}), Tensor::Vector({1, 1}), 0).beta_logit, 2.0);
  EXPECT_EQ(InteractionScore(net, Tensor::Vector({1, 1}), a, b, 0), 0.0);
  EXPECT_EQ(InteractionScore(net, Tensor::Vector({1, -1}), a, b, 0), -1.0);
}

TEST(InteractionTest, LinearNetHasNoInteractions) {
  Rng rng = MakeRng(15);
  const net::Network net{{5}, 2, {{LayerKind::kLinear, {UniformTensor({2, 5}, -1, 1, rng), Tensor::Zeros({2})}}}};
  const Tensor x = UniformTensor({5}, -1, 1, rng);
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) {
      std::vector<double> a(5, 0), b(5, 0);
      a[i] = b[j] = 1;
      EXPECT_NEAR(InteractionScore(net, x, Tensor::Vector(a), Tensor::Vector(b), 1), 0.0, 1e-15);
    }
}

TEST(InteractionTest, SymmetricAndRejectsOverlap) {
  Rng rng = MakeRng(16);
  const net::Network net = testing::RandomNetwork(rng);
  const Tensor x = UniformTensor(net.input_shape, -1, 1, rng);
  const int64_t n = NumElements(net.input_shape);
  std::vector<double> a(n, 0), b(n, 0);
  a[0] = 1;
  b[n - 1] = 1;
  const Tensor ta(net.input_shape, a), tb(net.input_shape, b);
  EXPECT_DOUBLE_EQ(InteractionScore(net, x, ta, tb, 0), InteractionScore(net, x, tb, ta, 0));
  EXPECT_THROW(InteractionScore(net, x, ta, ta, 0), InvalidArgument);
}

TEST(CdGradTest, ScoreIsDifferentiableThroughTape) {
  Rng rng = MakeRng(17);
  net::Architecture arch{{4}, 2, {{LayerKind::kLinear, 3}, {LayerKind::kTanh}, {LayerKind::kLinear, 2}}};
  const net::Network net = net::InitRandom(arch, 2);
  Tape tape;
  RecordingScope rec(tape);
  const auto params = net::TrackParams(net, tape);
  const Tensor x = UniformTensor({1, 4}, -1, 1, rng);
  const auto pairs = CdForward(net, params, x, Tensor::Vector({1, 1, 0, 0}));
  const Var out = Sum(Abs(pairs.back().beta));
  for (const auto& layer : params)
    for (const Var& p : layer) {
      const GradCheckReport r = FiniteDifferenceCheck(tape, out, p.node());
      EXPECT_TRUE(r.passed) << r.max_relative_error;
    }
}

}  // namespace
}  // namespace cdlab::cd
