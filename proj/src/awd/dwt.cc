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

#include "cdlab/awd/dwt.h"

#include <cmath>

#include "cdlab/errors.h"
#include "cdlab/ops.h"

namespace cdlab::awd {

namespace {

// g[n] from h for the raw arrays.
std::vector<double> Highpass(std::span<const double> h) {
  const size_t n = h.size();
  std::vector<double> g(n);
  for (size_t i = 0; i < n; ++i) g[i] = (i % 2 ? -1.0 : 1.0) * h[n - 1 - i];
  return g;
}

void CheckStepShapes(const Shape& h, const Shape& x) {
  if (h.size() != 1 || h[0] % 2 != 0 || h[0] == 0) {
    throw ShapeError("dwt: filter must be a nonempty even-length vector, got " + ShapeToString(h));
  }
  if (x.size() != 2 || x[1] % 2 != 0) {
    throw ShapeError("dwt: signal batch must be [B, L] with even L, got " + ShapeToString(x));
  }
}

// Analysis of rows of x by (h, g) into out (a then d).
void Analyze(std::span<const double> h, std::span<const double> x, int64_t rows, int64_t len,
             double* out) {
  const auto g = Highpass(h);
  const int64_t n = static_cast<int64_t>(h.size());
  const int64_t half = len / 2;
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * len;
    double* a = out + r * len;
    double* d = a + half;
    for (int64_t k = 0; k < half; ++k) {
      double sa = 0.0, sd = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        const double v = xr[(2 * k + i) % len];
        sa += h[i] * v;
        sd += g[i] * v;
      }
      a[k] = sa;
      d[k] = sd;
    }
  }
}

void Synthesize(std::span<const double> h, std::span<const double> c, int64_t rows, int64_t len,
                double* out) {
  const auto g = Highpass(h);
  const int64_t n = static_cast<int64_t>(h.size());
  const int64_t half = len / 2;
  std::fill(out, out + rows * len, 0.0);
  for (int64_t r = 0; r < rows; ++r) {
    const double* a = c.data() + r * len;
    const double* d = a + half;
    double* xr = out + r * len;
    for (int64_t k = 0; k < half; ++k) {
      for (int64_t i = 0; i < n; ++i) xr[(2 * k + i) % len] += h[i] * a[k] + g[i] * d[k];
    }
  }
}

// d/dh of sum(grad_out * analysis(h, x)).
std::vector<double> AnalysisFilterGrad(std::span<const double> h, std::span<const double> x,
                                       std::span<const double> go, int64_t rows, int64_t len) {
  const int64_t n = static_cast<int64_t>(h.size());
  const int64_t half = len / 2;
  std::vector<double> gh(n, 0.0), gg(n, 0.0);
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * len;
    const double* ga = go.data() + r * len;
    const double* gd = ga + half;
    for (int64_t k = 0; k < half; ++k) {
      for (int64_t i = 0; i < n; ++i) {
        const double v = xr[(2 * k + i) % len];
        gh[i] += ga[k] * v;
        gg[i] += gd[k] * v;
      }
    }
  }
  for (int64_t i = 0; i < n; ++i) gh[n - 1 - i] += (i % 2 ? -1.0 : 1.0) * gg[i];
  return gh;
}

// d/dh of sum(grad_out * synthesis(h, c)).
std::vector<double> SynthesisFilterGrad(std::span<const double> h, std::span<const double> c,
                                        std::span<const double> go, int64_t rows, int64_t len) {
  const int64_t n = static_cast<int64_t>(h.size());
  const int64_t half = len / 2;
  std::vector<double> gh(n, 0.0), gg(n, 0.0);
  for (int64_t r = 0; r < rows; ++r) {
    const double* a = c.data() + r * len;
    const double* d = a + half;
    const double* gx = go.data() + r * len;
    for (int64_t k = 0; k < half; ++k) {
      for (int64_t i = 0; i < n; ++i) {
        const double v = gx[(2 * k + i) % len];
        gh[i] += a[k] * v;
        gg[i] += d[k] * v;
      }
    }
  }
  for (int64_t i = 0; i < n; ++i) gh[n - 1 - i] += (i % 2 ? -1.0 : 1.0) * gg[i];
  return gh;
}

}  // namespace

Var HighpassFromLowpass(const Var& h) {
  OpFunctions fns;
  fns.forward = [](std::span<const Tensor> in) {
    return Tensor(in[0].shape(), Highpass(in[0].data()));
  };
  fns.backward = [](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                    std::span<const bool>) {
    const auto gd = g.data();
    const size_t n = gd.size();
    std::vector<double> gh(n);
    for (size_t i = 0; i < n; ++i) gh[n - 1 - i] = (i % 2 ? -1.0 : 1.0) * gd[i];
    return std::vector<Tensor>{Tensor(in[0].shape(), std::move(gh))};
  };
  const Var inputs[] = {h};
  return Apply(OpKind::kCustom, "highpass", inputs, std::move(fns));
}

Var AnalysisStep(const Var& h, const Var& x) {
  CheckStepShapes(h.shape(), x.shape());
  OpFunctions fns;
  fns.forward = [](std::span<const Tensor> in) {
    const int64_t rows = in[1].shape()[0], len = in[1].shape()[1];
    std::vector<double> out(rows * len);
    Analyze(in[0].data(), in[1].data(), rows, len, out.data());
    return Tensor(in[1].shape(), std::move(out));
  };
  fns.backward = [](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                    std::span<const bool> needs) {
    const int64_t rows = in[1].shape()[0], len = in[1].shape()[1];
    std::vector<Tensor> grads(2);
    if (needs[0]) {
      grads[0] = Tensor(in[0].shape(), AnalysisFilterGrad(in[0].data(), in[1].data(), g.data(), rows, len));
    }
    if (needs[1]) {
      std::vector<double> gx(rows * len);
      Synthesize(in[0].data(), g.data(), rows, len, gx.data());
      grads[1] = Tensor(in[1].shape(), std::move(gx));
    }
    return grads;
  };
  const Var inputs[] = {h, x};
  return Apply(OpKind::kCustom, "dwt_analysis", inputs, std::move(fns));
}

Var SynthesisStep(const Var& h, const Var& c) {
  CheckStepShapes(h.shape(), c.shape());
  OpFunctions fns;
  fns.forward = [](std::span<const Tensor> in) {
    const int64_t rows = in[1].shape()[0], len = in[1].shape()[1];
    std::vector<double> out(rows * len);
    Synthesize(in[0].data(), in[1].data(), rows, len, out.data());
    return Tensor(in[1].shape(), std::move(out));
  };
  fns.backward = [](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                    std::span<const bool> needs) {
    const int64_t rows = in[1].shape()[0], len = in[1].shape()[1];
    std::vector<Tensor> grads(2);
    if (needs[0]) {
      grads[0] = Tensor(in[0].shape(), SynthesisFilterGrad(in[0].data(), in[1].data(), g.data(), rows, len));
    }
    if (needs[1]) {
      std::vector<double> gc(rows * len);
      Analyze(in[0].data(), g.data(), rows, len, gc.data());
      grads[1] = Tensor(in[1].shape(), std::move(gc));
    }
    return grads;
  };
  const Var inputs[] = {h, c};
  return Apply(OpKind::kCustom, "dwt_synthesis", inputs, std::move(fns));
}

void CheckDwtShape(int64_t filter_length, int64_t length, int levels) {
  if (levels < 1) throw InvalidArgument("dwt: levels must be at least 1");
  if (filter_length <= 0 || filter_length % 2 != 0) {
    throw InvalidArgument("dwt: filter length must be even and positive");
  }
  if (levels >= 62 || length % (int64_t{1} << levels) != 0 || length == 0) {
    throw InvalidArgument("dwt: signal length " + std::to_string(length) +
                          " is not divisible by 2^" + std::to_string(levels));
  }
}

Var DwtForward(const Var& h, const Var& x, int levels) {
  if (x.shape().size() != 2) throw ShapeError("dwt: expected [B, L], got " + ShapeToString(x.shape()));
  CheckDwtShape(h.numel(), x.shape()[1], levels);
  const int64_t len = x.shape()[1];
  Var approx = x;
  std::vector<Var> details;  // detail_1 first
  int64_t cur = len;
  for (int j = 0; j < levels; ++j) {
    const Var step = AnalysisStep(h, approx);
    details.push_back(Narrow(step, 1, cur / 2, cur / 2));
    approx = Narrow(step, 1, 0, cur / 2);
    cur /= 2;
  }
  std::vector<Var> parts{approx};
  for (auto it = details.rbegin(); it != details.rend(); ++it) parts.push_back(*it);
  return Concatenate(parts, 1);
}

Var DwtInverse(const Var& h, const Var& coeffs, int levels) {
  if (coeffs.shape().size() != 2) {
    throw ShapeError("idwt: expected [B, L], got " + ShapeToString(coeffs.shape()));
  }
  const int64_t len = coeffs.shape()[1];
  CheckDwtShape(h.numel(), len, levels);
  int64_t cur = len >> levels;
  Var approx = Narrow(coeffs, 1, 0, cur);
  for (int j = levels; j >= 1; --j) {
    const Var detail = Narrow(coeffs, 1, cur, cur);
    const Var parts[] = {approx, detail};
    approx = SynthesisStep(h, Concatenate(parts, 1));
    cur *= 2;
  }
  return approx;
}

Tensor Dwt(const Tensor& h, const Tensor& x, int levels) {
  NoRecordingScope off;
  return DwtForward(h, x.Reshaped({1, x.numel()}), levels).value().Reshaped({x.numel()});
}

Tensor Idwt(const Tensor& h, const Tensor& coeffs, int levels) {
  NoRecordingScope off;
  return DwtInverse(h, coeffs.Reshaped({1, coeffs.numel()}), levels)
      .value()
      .Reshaped({coeffs.numel()});
}

std::vector<std::pair<int64_t, int64_t>> ScaleBounds(int64_t length, int levels) {
  std::vector<std::pair<int64_t, int64_t>> out;
  int64_t cur = length >> levels;
  out.emplace_back(0, cur);
  for (int j = levels; j >= 1; --j) {
    out.emplace_back(cur, cur);
    cur *= 2;
  }
  return out;
}

std::vector<std::vector<double>> SplitScales(const Tensor& coeffs, int levels) {
  std::vector<std::vector<double>> out;
  const auto d = coeffs.data();
  for (const auto& [off, len] : ScaleBounds(coeffs.numel(), levels)) {
    out.emplace_back(d.begin() + off, d.begin() + off + len);
  }
  return out;
}

Tensor HaarFilter() {
  const double r = 1.0 / std::sqrt(2.0);
  return Tensor::Vector({r, r});
}

Tensor Daubechies2Filter() {
  const double s3 = std::sqrt(3.0);
  const double d = 4.0 * std::sqrt(2.0);
  return Tensor::Vector({(1 + s3) / d, (3 + s3) / d, (3 - s3) / d, (1 - s3) / d});
}

Tensor Daubechies5Filter() {
  // Minimum-phase spectral factor of the degree-5 Daubechies polynomial,
  // computed in extended precision and rounded to double.
  return Tensor::Vector({0.16010239797419291448, 0.60382926979718967054, 0.72430852843777292773,
                         0.13842814590132073151, -0.24229488706638203186,
                         -0.032244869584638374648, 0.077571493840045713523,
                         -0.0062414902127982742742, -0.012580751999081999469,
                         0.003335725285473771278});
}

}  // namespace cdlab::awd
