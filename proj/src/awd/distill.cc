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

#include "cdlab/awd/distill.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cdlab/awd/dwt.h"
#include "cdlab/cd/cd.h"
#include "cdlab/errors.h"
#include "cdlab/ops.h"
#include "cdlab/random.h"

namespace cdlab::awd {

namespace {

// Cosine and sine design matrices [grid, N] at w_j = pi j / grid + offset.
std::pair<Tensor, Tensor> FourierRows(int64_t n, int grid, double offset) {
  std::vector<double> c(grid * n), s(grid * n);
  for (int j = 0; j < grid; ++j) {
    const double w = std::numbers::pi * j / grid + offset;
    for (int64_t k = 0; k < n; ++k) {
      c[j * n + k] = std::cos(w * k);
      s[j * n + k] = std::sin(w * k);
    }
  }
  return {Tensor({grid, n}, std::move(c)), Tensor({grid, n}, std::move(s))};
}

Var SquaredMagnitude(const Var& hcol, int64_t n, int grid, double offset) {
  const auto [c, s] = FourierRows(n, grid, offset);
  const Var re = MatMul(c, hcol);
  const Var im = MatMul(s, hcol);
  return Add(Multiply(re, re), Multiply(im, im));
}

// Autocorrelation at even lag 2k (k >= 0).
Var EvenLag(const Var& h, int64_t k) {
  const int64_t n = h.numel();
  if (k == 0) return Sum(Multiply(h, h));
  return Sum(Multiply(Narrow(h, 0, 2 * k, n - 2 * k), Narrow(h, 0, 0, n - 2 * k)));
}

struct ConstraintVars {
  Var sum_h, sum_g, norm, frequency, shifts;
};

ConstraintVars Constraints(const Var& h, int grid) {
  if (h.shape().size() != 1 || h.numel() < 2 || h.numel() % 2 != 0) {
    throw ShapeError("wavelet filter must be an even-length vector, got " +
                     ShapeToString(h.shape()));
  }
  if (grid < 1) throw InvalidArgument("frequency grid must hold at least one point");
  const int64_t n = h.numel();
  const Var sq2(Tensor::Scalar(std::sqrt(2.0)));
  const Var one(Tensor::Scalar(1.0));
  ConstraintVars v;
  v.sum_h = Power(Subtract(Sum(h), sq2), 2.0);
  v.sum_g = Power(Sum(HighpassFromLowpass(h)), 2.0);
  v.norm = Power(Subtract(Sum(Multiply(h, h)), one), 2.0);
  const Var hcol = Reshape(h, {n, 1});
  const Var total = Add(SquaredMagnitude(hcol, n, grid, 0.0),
                        SquaredMagnitude(hcol, n, grid, std::numbers::pi));
  v.frequency = Sum(Power(Subtract(total, Var(Tensor::Scalar(2.0))), 2.0));
  // Lags -2k and 2k give the same sum, so each k > 0 counts twice.
  Var shifts = Power(Subtract(EvenLag(h, 0), one), 2.0);
  for (int64_t k = 1; k <= n / 2 - 1; ++k) {
    shifts = Add(shifts, Scale(Power(EvenLag(h, k), 2.0), 2.0));
  }
  v.shifts = shifts;
  return v;
}

Shape BatchedInput(const net::Network& f, int64_t rows) {
  Shape s{rows};
  s.insert(s.end(), f.input_shape.begin(), f.input_shape.end());
  return s;
}

void CheckSignals(const Var& x) {
  if (x.shape().size() != 2) {
    throw ShapeError("awd: signals must be [m, L], got " + ShapeToString(x.shape()));
  }
}

}  // namespace

ConstraintTerms EvaluateConstraints(const Tensor& h, int grid_size) {
  NoRecordingScope off;
  const ConstraintVars v = Constraints(h, grid_size);
  ConstraintTerms t;
  t.sum_h = v.sum_h.value().item();
  t.sum_g = v.sum_g.value().item();
  t.norm = v.norm.value().item();
  t.frequency = v.frequency.value().item();
  t.shifts = v.shifts.value().item();

  // Unsquared residuals.
  const int64_t n = h.numel();
  double sh = 0.0, sg = 0.0, nn = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    sh += h[i];
    sg += (i % 2 ? -1.0 : 1.0) * h[n - 1 - i];
    nn += h[i] * h[i];
  }
  double worst = std::max({std::abs(sh - std::sqrt(2.0)), std::abs(sg), std::abs(nn - 1.0)});
  for (int64_t k = 1; k <= n / 2 - 1; ++k) {
    double acc = 0.0;
    for (int64_t i = 2 * k; i < n; ++i) acc += h[i] * h[i - 2 * k];
    worst = std::max(worst, std::abs(acc));
  }
  for (int j = 0; j < grid_size; ++j) {
    double mag = 0.0;
    for (double offset : {0.0, std::numbers::pi}) {
      const double w = std::numbers::pi * j / grid_size + offset;
      double re = 0.0, im = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        re += h[i] * std::cos(w * i);
        im += h[i] * std::sin(w * i);
      }
      mag += re * re + im * im;
    }
    worst = std::max(worst, std::abs(mag - 2.0));
  }
  t.max_residual = worst;
  return t;
}

Var ConstraintLoss(const Var& h, int grid_size) {
  const ConstraintVars v = Constraints(h, grid_size);
  return Add(Add(Add(v.sum_h, v.sum_g), Add(v.norm, v.frequency)), v.shifts);
}

Var WaveletLoss(const Var& h, const Var& x, double lambda, int levels, int grid_size) {
  CheckSignals(x);
  const Var constraints = ConstraintLoss(h, grid_size);
  if (lambda == 0.0) return constraints;
  const double m = static_cast<double>(x.shape()[0]);
  return Add(Scale(L1Norm(DwtForward(h, x, levels)), lambda / m), constraints);
}

Var ReconstructionLoss(const Var& h, const Var& x, int levels) {
  CheckSignals(x);
  const Var xhat = DwtInverse(h, DwtForward(h, x, levels), levels);
  return Scale(L2NormSquared(Subtract(x, xhat)), 1.0 / static_cast<double>(x.shape()[0]));
}

Var CoefficientAttributions(const net::Network& f, const net::ParamVars& params, const Var& h,
                            const Var& x, int levels, int class_index) {
  CheckSignals(x);
  const int64_t m = x.shape()[0], len = x.shape()[1];
  if (NumElements(f.input_shape) != len) {
    throw ShapeError("awd: network input " + ShapeToString(f.input_shape) +
                     " does not accept signals of length " + std::to_string(len));
  }
  if (class_index < 0 || class_index >= f.num_classes) {
    throw InvalidArgument("class index " + std::to_string(class_index) + " out of range");
  }
  std::vector<double> eye(len * len, 0.0);
  for (int64_t i = 0; i < len; ++i) eye[i * len + i] = 1.0;
  // Row j of the basis is Psi^-1 e_j.
  const Var basis = DwtInverse(h, Var(Tensor({len, len}, std::move(eye))), levels);
  const Var coeffs = DwtForward(h, x, levels);
  const Var beta = Multiply(Reshape(coeffs, {m, len, 1}), Reshape(basis, {1, len, len}));
  // gamma = x - beta carries the rest of the signal, including any
  // reconstruction residual of a filter that is not yet orthogonal.
  const Var gamma = Subtract(Reshape(x, {m, 1, len}), beta);
  const Shape rows = BatchedInput(f, m * len);
  cd::CdPair pair{Reshape(beta, rows), Reshape(gamma, rows)};
  const auto pairs = cd::CdPropagate(f, params, pair);
  return Reshape(Narrow(pairs.back().beta, 1, class_index, 1), {m, len});
}

Var InterpretationLoss(const net::Network& f, const Var& h, const Var& x, int levels,
                       int class_index) {
  const net::ParamVars params = net::ConstantParams(f);
  return L1Norm(CoefficientAttributions(f, params, h, x, levels, class_index));
}

void ValidateConfig(const AwdConfig& c) {
  if (c.lambda < 0.0 || c.interp_weight < 0.0) {
    throw InvalidArgument("awd: lambda and interp_weight must be nonnegative");
  }
  if (c.levels < 1) throw InvalidArgument("awd: levels must be at least 1");
  if (c.iterations < 0) throw InvalidArgument("awd: iterations must be nonnegative");
  if (!(c.learning_rate > 0.0)) throw InvalidArgument("awd: learning_rate must be positive");
  if (c.grid_size < 1) throw InvalidArgument("awd: grid_size must be positive");
  if (c.optimizer != "adam" && c.optimizer != "gd") {
    throw InvalidArgument("awd: optimizer must be gd or adam, got '" + c.optimizer + "'");
  }
  if (c.init.defined() && (c.init.shape().size() != 1 || c.init.numel() % 2 != 0)) {
    throw InvalidArgument("awd: init filter must be an even-length vector");
  }
}

AwdConfig AwdConfigFromJson(const nlohmann::json& j) {
  AwdConfig c;
  c.lambda = j.value("lambda", c.lambda);
  c.interp_weight = j.value("interp_weight", c.interp_weight);
  c.levels = j.value("levels", c.levels);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.iterations = j.value("iterations", c.iterations);
  c.seed = j.value("seed", c.seed);
  c.grid_size = j.value("grid_size", c.grid_size);
  c.optimizer = j.value("optimizer", c.optimizer);
  c.init_noise = j.value("init_noise", c.init_noise);
  c.class_index = j.value("class_index", c.class_index);
  if (j.contains("init")) {
    const auto& init = j.at("init");
    if (init.is_string()) {
      const std::string name = init.get<std::string>();
      if (name == "db5") c.init = Daubechies5Filter();
      else if (name == "db2") c.init = Daubechies2Filter();
      else if (name == "haar") c.init = HaarFilter();
      else throw InvalidArgument("awd: unknown init filter '" + name + "'");
    } else {
      c.init = Tensor::Vector(init.get<std::vector<double>>());
    }
  }
  ValidateConfig(c);
  return c;
}

nlohmann::json AwdConfigToJson(const AwdConfig& c) {
  nlohmann::json j = {{"lambda", c.lambda},       {"interp_weight", c.interp_weight},
                      {"levels", c.levels},       {"learning_rate", c.learning_rate},
                      {"iterations", c.iterations}, {"seed", c.seed},
                      {"grid_size", c.grid_size}, {"optimizer", c.optimizer},
                      {"init_noise", c.init_noise}, {"class_index", c.class_index}};
  j["init"] = (c.init.defined() ? c.init : Daubechies5Filter()).ToVector();
  return j;
}

namespace {

struct LossVars {
  Var reconstruction, wavelet, interpretation, total;
};

LossVars BuildLoss(const net::Network& f, const net::ParamVars& params, const Var& h,
                   const Var& x, const AwdConfig& c) {
  LossVars v;
  v.reconstruction = ReconstructionLoss(h, x, c.levels);
  v.wavelet = WaveletLoss(h, x, c.lambda, c.levels, c.grid_size);
  v.total = Add(v.reconstruction, v.wavelet);
  if (c.interp_weight > 0.0) {
    v.interpretation =
        L1Norm(CoefficientAttributions(f, params, h, x, c.levels, c.class_index));
    v.total = Add(v.total, Scale(v.interpretation, c.interp_weight));
  }
  return v;
}

LossComponents Values(const LossVars& v) {
  LossComponents out;
  out.reconstruction = v.reconstruction.value().item();
  out.wavelet = v.wavelet.value().item();
  out.interpretation = v.interpretation.value().defined() ? v.interpretation.value().item() : 0.0;
  out.total = v.total.value().item();
  return out;
}

}  // namespace

LossComponents EvaluateLoss(const net::Network& f, const Tensor& h, const Tensor& x,
                            const AwdConfig& config) {
  ValidateConfig(config);
  NoRecordingScope off;
  AwdConfig c = config;
  LossVars v = BuildLoss(f, net::ConstantParams(f), h, x, c);
  LossComponents out = Values(v);
  if (c.interp_weight == 0.0) {
    out.interpretation =
        InterpretationLoss(f, h, x, c.levels, c.class_index).value().item();
  }
  return out;
}

DistillResult Distill(const net::Network& f, const Tensor& x, const AwdConfig& config) {
  ValidateConfig(config);
  if (x.shape().size() != 2) {
    throw ShapeError("awd: signals must be [m, L], got " + ShapeToString(x.shape()));
  }
  std::vector<double> h = (config.init.defined() ? config.init : Daubechies5Filter()).ToVector();
  CheckDwtShape(static_cast<int64_t>(h.size()), x.shape()[1], config.levels);
  if (config.init_noise > 0.0) {
    Rng rng = MakeRng(config.seed, 0xa3d);
    std::normal_distribution<double> noise(0.0, config.init_noise);
    for (double& v : h) v += noise(rng);
  }
  const net::ParamVars params = net::ConstantParams(f);
  const size_t n = h.size();
  std::vector<double> m1(n, 0.0), m2(n, 0.0);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  DistillResult result;
  for (int it = 0; it <= config.iterations; ++it) {
    Tape tape;
    RecordingScope rec(tape);
    const Var hv = tape.Parameter(Tensor::Vector(h));
    const LossVars v = BuildLoss(f, params, hv, x, config);
    const LossComponents values = Values(v);
    result.history.push_back(values);
    if (!std::isfinite(values.total)) {
      throw DivergenceError("awd: loss is not finite at iteration " + std::to_string(it), it);
    }
    if (it == config.iterations) break;
    const Tensor g = tape.Backward(v.total)[hv];
    for (size_t i = 0; i < n; ++i) {
      if (config.optimizer == "gd") {
        h[i] -= config.learning_rate * g[i];
        continue;
      }
      m1[i] = b1 * m1[i] + (1 - b1) * g[i];
      m2[i] = b2 * m2[i] + (1 - b2) * g[i] * g[i];
      const double mh = m1[i] / (1 - std::pow(b1, it + 1));
      const double vh = m2[i] / (1 - std::pow(b2, it + 1));
      h[i] -= config.learning_rate * mh / (std::sqrt(vh) + eps);
    }
    for (double v : h) {
      if (!std::isfinite(v)) {
        throw DivergenceError("awd: filter is not finite after iteration " + std::to_string(it), it);
      }
    }
  }
  result.filter = Tensor::Vector(h);
  result.constraints = EvaluateConstraints(result.filter, config.grid_size);
  return result;
}

std::vector<double> MaxCoefficientFeatures(const Tensor& coeffs, int levels, int per_scale) {
  if (per_scale < 1) throw InvalidArgument("per_scale must be at least 1");
  std::vector<double> out;
  for (auto scale : SplitScales(coeffs, levels)) {
    if (static_cast<int>(scale.size()) < per_scale) {
      throw InvalidArgument("per_scale " + std::to_string(per_scale) +
                            " exceeds scale length " + std::to_string(scale.size()));
    }
    std::sort(scale.begin(), scale.end(), [](double a, double b) {
      if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
      return a > b;
    });
    out.insert(out.end(), scale.begin(), scale.begin() + per_scale);
  }
  return out;
}

double CompressionFactor(const Tensor& coeffs, const Tensor& attributions, double threshold) {
  if (coeffs.shape() != attributions.shape()) {
    throw ShapeError("compression factor: coefficients " + ShapeToString(coeffs.shape()) +
                     " and attributions " + ShapeToString(attributions.shape()) + " differ");
  }
  if (coeffs.numel() == 0) return 0.0;
  int64_t kept = 0;
  for (int64_t i = 0; i < coeffs.numel(); ++i) {
    if (std::abs(coeffs[i]) > threshold && std::abs(attributions[i]) > threshold) ++kept;
  }
  return static_cast<double>(kept) / static_cast<double>(coeffs.numel());
}

nlohmann::json FilterToJson(const Tensor& h, int levels) {
  return {{"format", "cdlab-wavelet"}, {"version", 1}, {"levels", levels}, {"h", h.ToVector()}};
}

Tensor FilterFromJson(const nlohmann::json& j, int* levels) {
  if (!j.is_object() || j.value("format", "") != "cdlab-wavelet") {
    throw ModelFormatError("not a cdlab-wavelet document");
  }
  if (j.value("version", 0) != 1) {
    throw VersionMismatchError("unsupported wavelet filter version " +
                               std::to_string(j.value("version", 0)));
  }
  const auto h = j.at("h").get<std::vector<double>>();
  if (h.empty() || h.size() % 2 != 0) throw ModelFormatError("filter must have even length");
  if (levels) *levels = j.value("levels", 1);
  return Tensor::Vector(h);
}

}  // namespace cdlab::awd
