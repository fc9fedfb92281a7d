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

#include "cdlab/trim/transforms.h"

#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "cdlab/awd/dwt.h"
#include "cdlab/errors.h"
#include "cdlab/gradcheck.h"
#include "cdlab/ops.h"
#include "random_nets.h"

namespace cdlab::trim {
namespace {

using testing::RandomMask;
using testing::RandomNetwork;

Tensor RandomSignal(const Shape& shape, Rng& rng) { return NormalTensor(shape, 0.0, 1.0, rng); }

net::Network LinearNet(int64_t d, int64_t classes, Rng& rng, bool bias) {
  net::Network n;
  n.input_shape = {d};
  n.num_classes = classes;
  net::Layer lin;
  lin.kind = net::LayerKind::kLinear;
  lin.params = {NormalTensor({classes, d}, 0.0, 1.0, rng),
                bias ? NormalTensor({classes}, 0.0, 1.0, rng) : Tensor::Zeros({classes})};
  n.layers.push_back(lin);
  return n;
}

TEST(TransformTest, IdentityLeavesInputUnchanged) {
  Rng rng = MakeRng(1);
  const Tensor x = RandomSignal({2, 3}, rng);
  const auto t = TransformSpec::Identity({2, 3});
  EXPECT_EQ(ApplyTransform(t, x).ToVector(), x.ToVector());
  EXPECT_EQ(InvertTransform(t, x).ToVector(), x.ToVector());
}

TEST(TransformTest, CosineAtBinThreeConcentratesOnConjugatePair) {
  const int n = 32;
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = std::cos(2 * std::numbers::pi * 3 * i / n);
  const Tensor s = ApplyTransform(TransformSpec::Fourier({n}), Tensor::Vector(x));
  for (int k = 0; k < n; ++k) {
    const double mag = std::hypot(s[2 * k], s[2 * k + 1]);
    if (k == 3 || k == 29) {
      EXPECT_NEAR(mag, n / 2.0, 1e-9);
    } else {
      EXPECT_LT(mag, 1e-9) << "bin " << k;
    }
  }
}

TEST(TransformTest, DftMatchesDirectSum) {
  Rng rng = MakeRng(2);
  for (int n : {5, 8, 12}) {
    const Tensor x = RandomSignal({n}, rng);
    const Tensor s = ApplyTransform(TransformSpec::Fourier({n}), x);
    for (int k = 0; k < n; ++k) {
      std::complex<double> acc = 0.0;
      for (int t = 0; t < n; ++t) acc += x[t] * std::polar(1.0, -2 * std::numbers::pi * k * t / n);
      EXPECT_NEAR(s[2 * k], acc.real(), 1e-10);
      EXPECT_NEAR(s[2 * k + 1], acc.imag(), 1e-10);
    }
  }
}

TEST(TransformTest, TwoDimensionalDftIsSeparable) {
  Rng rng = MakeRng(3);
  const Tensor x = RandomSignal({1, 4, 6}, rng);
  const Tensor s = ApplyTransform(TransformSpec::Fourier({1, 4, 6}), x);
  for (int u = 0; u < 4; ++u) {
    for (int v = 0; v < 6; ++v) {
      std::complex<double> acc = 0.0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 6; ++j)
          acc += x[i * 6 + j] *
                 std::polar(1.0, -2 * std::numbers::pi * (double(u * i) / 4 + double(v * j) / 6));
      EXPECT_NEAR(s[2 * (u * 6 + v)], acc.real(), 1e-10);
      EXPECT_NEAR(s[2 * (u * 6 + v) + 1], acc.imag(), 1e-10);
    }
  }
}

TEST(TransformTest, HaarOfOneTwo) {
  const auto t = TransformSpec::Wavelet(2, awd::HaarFilter(), 1);
  const Tensor s = ApplyTransform(t, Tensor::Vector({1.0, 2.0}));
  EXPECT_NEAR(s[0], 3.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s[1], -1.0 / std::sqrt(2.0), 1e-15);
  const Tensor back = InvertTransform(t, s);
  EXPECT_NEAR(back[0], 1.0, 1e-15);
  EXPECT_NEAR(back[1], 2.0, 1e-15);
}

TEST(TransformTest, DftAndDwtInvertOnRandomSignals) {
  Rng rng = MakeRng(4);
  const std::vector<TransformSpec> specs = {
      TransformSpec::Fourier({64}),
      TransformSpec::Fourier({2, 8, 8}),
      TransformSpec::Wavelet(64, awd::HaarFilter(), 3),
      TransformSpec::Wavelet(64, awd::Daubechies2Filter(), 4),
      TransformSpec::Wavelet(64, awd::Daubechies5Filter(), 2),
  };
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const TransformSpec& t = specs[trial % specs.size()];
    const Tensor x = RandomSignal(t.input_shape, rng);
    worst = std::max(worst, MaxAbsDiff(x, InvertTransform(t, ApplyTransform(t, x))));
    EXPECT_EQ(Residual(t, x).ToVector(), std::vector<double>(x.numel(), 0.0));
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(TransformTest, ProjectionRecordsResidualWhenNotInvertible) {
  Rng rng = MakeRng(5);
  const Tensor square = NormalTensor({4, 4}, 0.0, 1.0, rng);
  const auto sq = TransformSpec::Projection({4}, square);
  EXPECT_FALSE(sq.has_residual);
  const Tensor x = RandomSignal({4}, rng);
  EXPECT_LE(MaxAbsDiff(x, InvertTransform(sq, ApplyTransform(sq, x))), 1e-9);

  const Tensor wide = NormalTensor({2, 4}, 0.0, 1.0, rng);
  const auto w = TransformSpec::Projection({4}, wide);
  EXPECT_TRUE(w.has_residual);
  const Tensor s = ApplyTransform(w, x);
  const Tensor back = InvertTransform(w, s);
  const Tensor r = Residual(w, x);
  double norm = 0.0;
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(back[i] + r[i], x[i], 1e-12);
    norm += r[i] * r[i];
  }
  EXPECT_GT(norm, 1e-6);
  // Reprojecting the reconstruction recovers s.
  const Tensor again = ApplyTransform(w, back);
  EXPECT_LE(MaxAbsDiff(again, s), 1e-9);
}

TEST(TransformTest, InversionWithoutPseudoInverseThrows) {
  const auto wide = TransformSpec::ProjectionWithoutInverse({3}, Tensor({2, 3}, {1, 0, 0, 0, 1, 0}));
  EXPECT_THROW(InvertTransform(wide, Tensor::Vector({1.0, 2.0})), DomainError);
  const auto singular =
      TransformSpec::ProjectionWithoutInverse({2}, Tensor({2, 2}, {1, 2, 2, 4}));
  EXPECT_THROW(InvertTransform(singular, Tensor::Vector({1.0, 2.0})), DomainError);
  const auto regular =
      TransformSpec::ProjectionWithoutInverse({2}, Tensor({2, 2}, {2, 0, 0, 4}));
  const Tensor back = InvertTransform(regular, Tensor::Vector({2.0, 4.0}));
  EXPECT_NEAR(back[0], 1.0, 1e-15);
  EXPECT_NEAR(back[1], 1.0, 1e-15);
}

TEST(TransformTest, NonConformingShapesThrow) {
  EXPECT_THROW(ApplyTransform(TransformSpec::Fourier({8}), Tensor::Zeros({6})), ShapeError);
  EXPECT_THROW(InvertTransform(TransformSpec::Fourier({8}), Tensor::Zeros({8})), ShapeError);
  EXPECT_THROW(TransformSpec::Wavelet(12, awd::HaarFilter(), 3), InvalidArgument);
  EXPECT_THROW(TransformSpec::Projection({3}, Tensor::Zeros({2, 4})), ShapeError);
}

TEST(TransformTest, ForwardIsDifferentiableInTheFilter) {
  Rng rng = MakeRng(6);
  Tape tape;
  RecordingScope rec(tape);
  const Var h = tape.Parameter(awd::Daubechies2Filter());
  const Var x = tape.Parameter(NormalTensor({2, 16}, 0.0, 1.0, rng));
  const auto t = TransformSpec::Wavelet(16, h, 2);
  const Var out = Sum(Power(Inverse(t, Multiply(Forward(t, x), Var(NormalTensor({2, 16}, 0.0, 1.0, rng)))), 2.0));
  EXPECT_TRUE(FiniteDifferenceCheck(tape, out, h.node()).passed);
  EXPECT_TRUE(FiniteDifferenceCheck(tape, out, x.node()).passed);
}

TEST(BandMaskTest, FullBandSelectsEverything) {
  for (const Shape& shape : {Shape{32}, Shape{31}, Shape{1, 8, 8}, Shape{2, 6, 10}}) {
    const Tensor m = BandMask(shape, 0.0, NyquistFrequency(shape));
    for (int64_t i = 0; i < m.numel(); ++i) ASSERT_EQ(m[i], 1.0) << ShapeToString(shape);
  }
}

TEST(BandMaskTest, DisjointBandsTile) {
  for (const Shape& shape : {Shape{32}, Shape{1, 8, 8}}) {
    const double nyq = NyquistFrequency(shape);
    const std::vector<double> edges = {0.0, 1.0, 2.5, 4.0, nyq};
    std::vector<double> count(BandMask(shape, 0.0, nyq).numel(), 0.0);
    for (size_t b = 0; b + 1 < edges.size(); ++b) {
      const Tensor m = BandMask(shape, edges[b], edges[b + 1]);
      for (int64_t i = 0; i < m.numel(); ++i) count[i] += m[i];
    }
    for (double c : count) EXPECT_EQ(c, 1.0);
  }
}

TEST(BandMaskTest, SingleBandSelectsConjugatePair) {
  const Tensor m = BandMask({32}, 3.0, 4.0);
  for (int k = 0; k < 32; ++k) {
    const double expected = (k == 3 || k == 29) ? 1.0 : 0.0;
    EXPECT_EQ(m[2 * k], expected) << k;
    EXPECT_EQ(m[2 * k + 1], expected) << k;
  }
  EXPECT_EQ(FrequencyBinMask(32, 3).ToVector(), m.ToVector());
}

TEST(BandMaskTest, InvalidBandsThrow) {
  EXPECT_THROW(BandMask({32}, 4.0, 4.0), InvalidArgument);
  EXPECT_THROW(BandMask({32}, -1.0, 4.0), InvalidArgument);
  EXPECT_THROW(BandMask({32}, 0.0, 17.0), InvalidArgument);
  EXPECT_THROW(FrequencyBinMask(32, 17), InvalidArgument);
}

TEST(TrimCdTest, IdentityFullMaskEqualsLogit) {
  Rng rng = MakeRng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const net::Network n = RandomNetwork(rng);
    const Tensor x = RandomSignal(n.input_shape, rng);
    const auto t = TransformSpec::Identity(n.input_shape);
    const Tensor logits = net::Logits(n, net::AddBatchAxis(x));
    const Tensor full = Tensor::Full(n.input_shape, 1.0);
    const Tensor empty = Tensor::Zeros(n.input_shape);
    for (int c = 0; c < n.num_classes; ++c) {
      EXPECT_EQ(TrimAttribution(n, t, x, full, c, AttributionMethod::kCd), logits[c]);
      EXPECT_EQ(TrimAttribution(n, t, x, empty, c, AttributionMethod::kCd), 0.0);
    }
  }
}

TEST(TrimCdTest, FourierFullAndEmptyMasks) {
  Rng rng = MakeRng(8);
  int checked = 0;
  while (checked < 15) {
    int family = 0;
    const net::Network n = RandomNetwork(rng, &family);
    if (family == 2) continue;
    ++checked;
    const Tensor x = RandomSignal(n.input_shape, rng);
    const auto t = TransformSpec::Fourier(n.input_shape);
    const Shape s = t.TransformedShape();
    const Tensor masks[] = {Tensor::Full(s, 1.0), Tensor::Zeros(s)};
    const auto scores = TrimCdScores(n, t, x, masks, 1);
    const double logit = net::Logits(n, net::AddBatchAxis(x))[1];
    EXPECT_NEAR(scores[0].beta_logit, logit, 1e-9 * std::max(1.0, std::abs(logit)));
    EXPECT_EQ(scores[0].gamma_logit, 0.0);
    EXPECT_EQ(scores[1].beta_logit, 0.0);
  }
}

TEST(TrimCdTest, BetaPlusGammaMatchesReconstructionLogit) {
  Rng rng = MakeRng(9);
  for (int trial = 0; trial < 40; ++trial) {
    int family = 0;
    const net::Network n = RandomNetwork(rng, &family);
    const Tensor x = RandomSignal(n.input_shape, rng);
    TransformSpec t = family == 2 ? TransformSpec::Projection(
                                        n.input_shape, NormalTensor({5, NumElements(n.input_shape)}, 0.0, 1.0, rng))
                                  : TransformSpec::Fourier(n.input_shape);
    const Tensor mask = RandomMask(t.TransformedShape(), rng);
    const Tensor masks[] = {mask};
    const auto score = TrimCdScores(n, t, x, masks, 0)[0];
    const double logit = net::Logits(n, net::AddBatchAxis(x))[0];
    EXPECT_NEAR(score.beta_logit + score.gamma_logit, logit, 1e-6 * std::max(1.0, std::abs(logit)));
  }
}

TEST(TrimCdTest, DisjointMasksAddOnBiasFreeLinearNet) {
  Rng rng = MakeRng(10);
  const net::Network n = LinearNet(16, 2, rng, false);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = RandomSignal({16}, rng);
    const auto t = TransformSpec::Fourier({16});
    const Tensor lo = BandMask({16}, 0.0, 3.0);
    const Tensor hi = BandMask({16}, 3.0, 8.0);
    const double logit = net::Logits(n, net::AddBatchAxis(x))[1];
    const double sum = TrimAttribution(n, t, x, lo, 1, AttributionMethod::kCd) +
                       TrimAttribution(n, t, x, hi, 1, AttributionMethod::kCd);
    EXPECT_NEAR(sum, logit, 1e-10);
  }
}

TEST(IntegratedGradientsTest, LinearFunctionIsExactForAnyStepCount) {
  Rng rng = MakeRng(11);
  const Tensor w = NormalTensor({1, 6}, 0.0, 1.0, rng);
  const BatchFunction f = [&](const Var& s) { return MatMul(s, w, true); };
  const Tensor s = NormalTensor({6}, 0.0, 1.0, rng);
  const Tensor b = NormalTensor({6}, 0.0, 1.0, rng);
  for (int steps : {1, 7, 64}) {
    const Tensor a = IntegratedGradients(f, s, b, steps);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(a[i], w[i] * (s[i] - b[i]), 1e-12);
  }
}

TEST(IntegratedGradientsTest, BaselineAtPointGivesZero) {
  Rng rng = MakeRng(12);
  const net::Network n = RandomNetwork(rng);
  const auto t = TransformSpec::Identity(n.input_shape);
  const auto f = ReparameterizedLogit(n, t, Tensor::Zeros(n.input_shape), 0);
  const Tensor s = RandomSignal(n.input_shape, rng);
  const Tensor a = IntegratedGradients(f, s, s, 16);
  for (int64_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a[i], 0.0);
  EXPECT_THROW(IntegratedGradients(f, s, s, 0), InvalidArgument);
}

TEST(IntegratedGradientsTest, CompletenessOnSmallNets) {
  Rng rng = MakeRng(13);
  int checked = 0;
  while (checked < 10) {
    int family = 0;
    const net::Network n = RandomNetwork(rng, &family);
    if (family == 2) continue;
    ++checked;
    const auto t = TransformSpec::Fourier(n.input_shape);
    const Tensor x = RandomSignal(n.input_shape, rng);
    const Tensor a = TrimIntegratedGradients(n, t, x, 0, 256);
    double total = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) total += a[i];
    const double fx = net::Logits(n, net::AddBatchAxis(x))[0];
    const double f0 = net::Logits(n, net::AddBatchAxis(Tensor::Zeros(n.input_shape)))[0];
    EXPECT_LE(std::abs(total - (fx - f0)), 0.01 * std::max(std::abs(fx - f0), 1e-3));
  }
}

TEST(TrimAttributionTest, MethodNames) {
  EXPECT_EQ(AttributionMethodFromName("cd"), AttributionMethod::kCd);
  EXPECT_EQ(AttributionMethodFromName("integrated-gradients"),
            AttributionMethod::kIntegratedGradients);
  EXPECT_THROW(AttributionMethodFromName("saliency"), InvalidArgument);
  EXPECT_THROW(TransformKindFromName("wavelet-packet"), InvalidArgument);
}

}  // namespace
}  // namespace cdlab::trim
