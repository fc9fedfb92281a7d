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

#include "cdlab/cdep/trainer.h"

#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "cdlab/errors.h"
#include "cdlab/gradcheck.h"
#include "cdlab/net/model_io.h"
#include "cdlab/ops.h"
#include "random_nets.h"

namespace cdlab::cdep {
namespace {

using testing::RandomMask;
using testing::RandomNetwork;

net::Network Mlp(int64_t in, int64_t hidden, int64_t classes, uint64_t seed) {
  net::Architecture arch;
  arch.input_shape = {in};
  arch.num_classes = classes;
  arch.layers = {{net::LayerKind::kLinear, hidden}, {net::LayerKind::kRelu},
                 {net::LayerKind::kLinear, classes}};
  return net::InitRandom(arch, seed);
}

// Direct log-sum-exp evaluation of the summed cross-entropy.
double CrossEntropy(const Tensor& logits, const std::vector<int>& labels) {
  const int64_t c = logits.shape()[1];
  double total = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    double z = 0.0;
    for (int64_t k = 0; k < c; ++k) z += std::exp(logits[i * c + k]);
    total += std::log(z) - logits[i * c + labels[i]];
  }
  return total;
}

TEST(CdepLossTest, ZeroLambdaIsCrossEntropy) {
  Rng rng = MakeRng(1);
  const net::Network n = Mlp(4, 5, 3, 7);
  const Tensor x = NormalTensor({6, 4}, 0.0, 1.0, rng);
  const std::vector<int> y = {0, 1, 2, 2, 1, 0};
  const ExplanationTarget e{-1, Tensor::Vector({1, 0, 0, 0}), 0.3};
  const LossTerms loss = CdepLoss(n, net::ConstantParams(n), x, y, {}, {&e, 1}, 0.0);
  EXPECT_NEAR(loss.total.value().item(), CrossEntropy(net::Logits(n, x), y), 1e-12);
}

TEST(CdepLossTest, TargetAtCurrentBetaGivesZero) {
  Rng rng = MakeRng(2);
  const net::Network n = Mlp(4, 5, 2, 8);
  const Tensor x = NormalTensor({1, 4}, 0.0, 1.0, rng);
  const Tensor group = Tensor::Vector({0, 1, 1, 0});
  const double beta = cd::ComputeCdScore(n, x, group, 1).beta_logit;
  const ExplanationTarget e{0, group, beta};
  const std::vector<int> y = {1};
  const LossTerms loss = CdepLoss(n, net::ConstantParams(n), x, y, {}, {&e, 1}, 5.0);
  EXPECT_EQ(loss.explanation.value().item(), 0.0);
  EXPECT_EQ(loss.total.value().item(), loss.prediction.value().item());
}

TEST(CdepLossTest, LinearNetExplanationGradient) {
  Rng rng = MakeRng(3);
  net::Network n;
  n.input_shape = {3};
  n.num_classes = 2;
  net::Layer lin;
  lin.kind = net::LayerKind::kLinear;
  lin.params = {NormalTensor({2, 3}, 0.0, 1.0, rng), NormalTensor({2}, 0.0, 1.0, rng)};
  n.layers = {lin};
  const Tensor x = NormalTensor({1, 3}, 0.0, 1.0, rng);
  const ExplanationTarget e{0, Tensor::Vector({1, 1, 0}), 0.25};
  Tape tape;
  RecordingScope rec(tape);
  const auto params = net::TrackParams(n, tape);
  const std::vector<int> y = {1};
  const LossTerms loss = CdepLoss(n, params, x, y, {}, {&e, 1}, 1.0);
  for (const Var& p : params[0]) {
    const auto r = FiniteDifferenceCheck(tape, loss.explanation, p.node());
    EXPECT_TRUE(r.passed) << r.max_relative_error;
  }
}

TEST(CdepLossTest, ExplanationGradientsOnRandomNets) {
  Rng rng = MakeRng(4);
  int passed = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const net::Network n = RandomNetwork(rng);
    Shape batch_shape{2};
    batch_shape.insert(batch_shape.end(), n.input_shape.begin(), n.input_shape.end());
    const Tensor x = NormalTensor(batch_shape, 0.0, 1.0, rng);
    std::vector<ExplanationTarget> expl = {{-1, RandomMask(n.input_shape, rng), 0.1},
                                           {0, RandomMask(n.input_shape, rng), -0.2}};
    const std::vector<int> y = {0, 1};
    Tape tape;
    RecordingScope rec(tape);
    const auto params = net::TrackParams(n, tape);
    const LossTerms loss = CdepLoss(n, params, x, y, {}, expl, 1.0);
    bool ok = true;
    for (const auto& layer : params) {
      for (const Var& p : layer) {
        const auto r = FiniteDifferenceCheck(tape, loss.total, p.node());
        ok = ok && r.passed;
        EXPECT_TRUE(r.passed) << "trial " << trial << ": " << r.max_relative_error;
      }
    }
    passed += ok;
  }
  EXPECT_EQ(passed, 20);
}

TEST(CdepLossTest, MonotoneInLambda) {
  Rng rng = MakeRng(5);
  const net::Network n = Mlp(4, 6, 2, 9);
  const Tensor x = NormalTensor({5, 4}, 0.0, 1.0, rng);
  const std::vector<int> y = {0, 1, 1, 0, 1};
  const ExplanationTarget e{-1, Tensor::Vector({1, 0, 1, 0}), 0.0};
  double prev = -1e300;
  for (double lambda : {0.0, 0.1, 1.0, 10.0}) {
    const double v = CdepLoss(n, net::ConstantParams(n), x, y, {}, {&e, 1}, lambda)
                         .total.value()
                         .item();
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(CdepLossTest, SquaredErrorOption) {
  Rng rng = MakeRng(6);
  const net::Network n = Mlp(3, 4, 1, 10);
  const Tensor x = NormalTensor({4, 3}, 0.0, 1.0, rng);
  const std::vector<double> t = {0.5, -1.0, 2.0, 0.0};
  const LossTerms loss = CdepLoss(n, net::ConstantParams(n), x, {}, t, {}, 0.0,
                                  PredictionLoss::kSquaredError);
  const Tensor out = net::Logits(n, x);
  double expected = 0.0;
  for (int i = 0; i < 4; ++i) expected += (out[i] - t[i]) * (out[i] - t[i]);
  EXPECT_NEAR(loss.total.value().item(), expected, 1e-12);
}

TEST(CdepLossTest, ShapeErrors) {
  const net::Network n = Mlp(4, 3, 2, 11);
  const Tensor x = Tensor::Zeros({1, 4});
  const std::vector<int> y = {0};
  const ExplanationTarget bad{-1, Tensor::Zeros({3}), 0.0};
  EXPECT_THROW(CdepLoss(n, net::ConstantParams(n), x, y, {}, {&bad, 1}, 1.0), ShapeError);
  EXPECT_THROW(CdepLoss(n, net::ConstantParams(n), Tensor::Zeros({1, 5}), y, {}, {}, 1.0),
               ShapeError);
}

TEST(CdepLossTest, ExplanationCostIsConstantPerGroup) {
  Rng rng = MakeRng(7);
  const net::Network n = Mlp(16, 32, 4, 12);
  const Tensor x = NormalTensor({8, 16}, 0.0, 1.0, rng);
  const std::vector<int> y(8, 1);
  const auto params = net::ConstantParams(n);
  auto doubles_for = [&](int groups) {
    std::vector<ExplanationTarget> expl;
    for (int g = 0; g < groups; ++g) expl.push_back({-1, RandomMask({16}, rng), 0.0});
    Tape tape;
    RecordingScope rec(tape);
    const auto vars = net::TrackParams(n, tape);
    const int64_t before = ThreadAllocStats().doubles;
    const LossTerms loss = CdepLoss(n, vars, x, y, {}, expl, 1.0);
    tape.Backward(loss.total);
    return ThreadAllocStats().doubles - before;
  };
  const double base = static_cast<double>(doubles_for(0));
  for (int groups : {1, 4, 16}) {
    const double extra = static_cast<double>(doubles_for(groups)) - base;
    EXPECT_LE(extra / groups, 16.0 * base) << groups;
  }
}

net::Dataset Separable(int n, Rng& rng) {
  net::Dataset d;
  d.inputs = NormalTensor({n, 2}, 0.0, 1.0, rng);
  std::vector<double> x = d.inputs.ToVector();
  for (int i = 0; i < n; ++i) {
    const int label = x[2 * i] + x[2 * i + 1] > 0 ? 1 : 0;
    x[2 * i] += label ? 0.5 : -0.5;
    d.labels.push_back(label);
  }
  d.inputs = Tensor({n, 2}, std::move(x));
  return d;
}

TEST(TrainTest, SeparableReachesFullAccuracy) {
  Rng rng = MakeRng(8);
  const net::Dataset d = Separable(100, rng);
  TrainConfig c;
  c.epochs = 60;
  c.learning_rate = 0.5;
  c.batch_size = 10;
  const TrainResult r = Train(Mlp(2, 8, 2, 13), d, c);
  EXPECT_EQ(net::Accuracy(r.net, d), 1.0);
  ASSERT_EQ(r.history.size(), 60u);
  EXPECT_LT(r.history.back().prediction, r.history.front().prediction);
}

TEST(TrainTest, DeterministicGivenSeed) {
  Rng rng = MakeRng(9);
  const net::Dataset d = Separable(40, rng);
  TrainConfig c;
  c.epochs = 3;
  c.lambda = 0.5;
  c.pixels_per_batch = 0;
  c.explanations = {{-1, Tensor::Vector({1, 0}), 0.0}};
  const auto a = Train(Mlp(2, 4, 2, 14), d, c).net;
  const auto b = Train(Mlp(2, 4, 2, 14), d, c).net;
  for (size_t l = 0; l < a.layers.size(); ++l)
    for (size_t k = 0; k < a.layers[l].params.size(); ++k)
      EXPECT_EQ(a.layers[l].params[k].ToVector(), b.layers[l].params[k].ToVector());
}

TEST(TrainTest, PixelSamplingDoesNotDisturbZeroLambdaRuns) {
  Rng rng = MakeRng(10);
  net::Architecture arch;
  arch.input_shape = {3, 4, 4};
  arch.num_classes = 2;
  arch.layers = {{net::LayerKind::kFlatten}, {net::LayerKind::kLinear, 2}};
  const net::Network init = net::InitRandom(arch, 15);
  net::Dataset d;
  d.inputs = NormalTensor({12, 3, 4, 4}, 0.0, 1.0, rng);
  for (int i = 0; i < 12; ++i) d.labels.push_back(i % 2);
  TrainConfig with_pixels, without;
  with_pixels.epochs = without.epochs = 2;
  with_pixels.batch_size = without.batch_size = 4;
  with_pixels.pixels_per_batch = 10;
  without.pixels_per_batch = 0;
  const auto a = Train(init, d, with_pixels).net;
  const auto b = Train(init, d, without).net;
  EXPECT_EQ(a.layers[1].params[0].ToVector(), b.layers[1].params[0].ToVector());
}

TEST(TrainTest, PenaltyRemovesSpuriousFeature) {
  Rng rng = MakeRng(11);
  auto make = [&](int n, bool spurious) {
    net::Dataset d;
    std::vector<double> x(n * 5);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 1; j < 5; ++j) {
        x[i * 5 + j] = std::normal_distribution<double>(0.0, 1.0)(rng);
        s += x[i * 5 + j] * (j % 2 ? 1.0 : 0.5);
      }
      const int label = s > 0 ? 1 : 0;
      const int shown = spurious ? label : std::bernoulli_distribution(0.5)(rng);
      x[i * 5] = shown ? 2.0 : -2.0;
      d.labels.push_back(label);
    }
    d.inputs = Tensor({n, 5}, std::move(x));
    return d;
  };
  const net::Dataset train = make(200, true);
  const net::Dataset test = make(400, false);
  TrainConfig c;
  c.epochs = 40;
  c.learning_rate = 0.1;
  c.batch_size = 20;
  c.pixels_per_batch = 0;
  const net::Network init = Mlp(5, 8, 2, 16);
  const double vanilla = net::Accuracy(Train(init, train, c).net, test);
  c.lambda = 1.0;
  c.explanations = {{-1, Tensor::Vector({1, 0, 0, 0, 0}), 0.0}};
  const double penalized = net::Accuracy(Train(init, train, c).net, test);
  EXPECT_GT(penalized, vanilla);
}

TEST(TrainTest, DivergenceReportsEpoch) {
  Rng rng = MakeRng(12);
  const net::Dataset d = Separable(20, rng);
  TrainConfig c;
  c.epochs = 50;
  c.learning_rate = 1e12;
  try {
    Train(Mlp(2, 4, 2, 17), d, c);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.step(), 0);
    EXPECT_LT(e.step(), 50);
  }
}

TEST(PixelGroupTest, Sampling) {
  const Shape img{3, 8, 8};
  const auto all = SamplePixelGroups(img, 64, 1);
  std::vector<int> count(64, 0);
  for (const auto& g : all) {
    int ones = 0;
    for (int64_t p = 0; p < 64; ++p) {
      if (g[p] != 0.0) {
        ++count[p];
        ++ones;
        EXPECT_EQ(g[64 + p], 1.0);
        EXPECT_EQ(g[128 + p], 1.0);
      }
    }
    EXPECT_EQ(ones, 1);
  }
  for (int c : count) EXPECT_EQ(c, 1);
  const auto a = SamplePixelGroups(img, 5, 42);
  const auto b = SamplePixelGroups(img, 5, 42);
  std::set<std::vector<double>> distinct;
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].ToVector(), b[i].ToVector());
    distinct.insert(a[i].ToVector());
  }
  EXPECT_EQ(distinct.size(), 5u);
  EXPECT_THROW(SamplePixelGroups(img, 65, 1), InvalidArgument);
}

TEST(TrainConfigTest, JsonAndValidation) {
  const TrainConfig c =
      TrainConfigFromJson({{"lambda", 2.0}, {"epochs", 3}, {"loss", "squared-error"}});
  EXPECT_EQ(c.lambda, 2.0);
  EXPECT_EQ(c.loss, PredictionLoss::kSquaredError);
  EXPECT_THROW(TrainConfigFromJson({{"lambda", -1.0}}), InvalidArgument);
  EXPECT_THROW(TrainConfigFromJson({{"loss", "hinge"}}), InvalidArgument);
}

}  // namespace
}  // namespace cdlab::cdep
