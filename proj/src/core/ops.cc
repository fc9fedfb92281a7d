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

#include "cdlab/ops.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "cdlab/errors.h"
#include "cdlab/fft.h"

namespace cdlab {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

std::string Describe(const char* op, std::initializer_list<Shape> shapes) {
  std::string s = std::string(op) + ": incompatible shapes";
  for (const auto& sh : shapes) s += " " + ShapeToString(sh);
  return s;
}

// ---------------------------------------------------------------------------
// Broadcasting.

struct Broadcast {
  Shape out;
  std::vector<int64_t> ia;  // empty when a already has the output shape
  std::vector<int64_t> ib;
  int64_t a(int64_t k) const { return ia.empty() ? k : ia[k]; }
  int64_t b(int64_t k) const { return ib.empty() ? k : ib[k]; }
};

std::vector<int64_t> BroadcastIndex(const Shape& x, const Shape& out) {
  const int r = static_cast<int>(out.size());
  const int off = r - static_cast<int>(x.size());
  std::vector<int64_t> stride(r, 0);
  int64_t s = 1;
  for (int d = r - 1; d >= off; --d) {
    const int64_t xd = x[d - off];
    stride[d] = xd == 1 ? 0 : s;
    s *= xd;
  }
  const int64_t n = NumElements(out);
  std::vector<int64_t> idx(n);
  std::vector<int64_t> counter(r, 0);
  int64_t flat = 0;
  for (int64_t k = 0; k < n; ++k) {
    idx[k] = flat;
    for (int d = r - 1; d >= 0; --d) {
      ++counter[d];
      flat += stride[d];
      if (counter[d] < out[d]) break;
      flat -= stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  return idx;
}

Broadcast MakeBroadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast plan;
  if (a == b) {
    plan.out = a;
    return plan;
  }
  const size_t r = std::max(a.size(), b.size());
  plan.out.assign(r, 1);
  for (size_t i = 0; i < r; ++i) {
    const int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) throw ShapeError(Describe(op, {a, b}));
    plan.out[i] = da == 1 ? db : da;
  }
  if (a != plan.out) plan.ia = BroadcastIndex(a, plan.out);
  if (b != plan.out) plan.ib = BroadcastIndex(b, plan.out);
  return plan;
}

// Elementwise binary op. `f(a, b)` computes the value; `da(a, b, y)` and
// `db(a, b, y)` the partial derivatives.
template <class F, class DA, class DB>
Var Binary(OpKind kind, const Var& a, const Var& b, F f, DA da, DB db,
           OpFunctions::Branches branches = {}) {
  OpFunctions fns;
  const char* name = OpKindName(kind);
  fns.forward = [f, name](std::span<const Tensor> in) {
    const Broadcast p = MakeBroadcast(in[0].shape(), in[1].shape(), name);
    const auto x = in[0].data();
    const auto y = in[1].data();
    std::vector<double> out(NumElements(p.out));
    for (size_t k = 0; k < out.size(); ++k) out[k] = f(x[p.a(k)], y[p.b(k)]);
    return Tensor(p.out, std::move(out));
  };
  fns.backward = [da, db, name](std::span<const Tensor> in, const Tensor& out,
                                const Tensor& g, std::span<const bool> needs) {
    const Broadcast p = MakeBroadcast(in[0].shape(), in[1].shape(), name);
    const auto x = in[0].data();
    const auto y = in[1].data();
    const auto o = out.data();
    const auto gd = g.data();
    std::vector<Tensor> grads(2);
    if (needs[0]) {
      std::vector<double> ga(in[0].numel(), 0.0);
      for (size_t k = 0; k < gd.size(); ++k) {
        ga[p.a(k)] += gd[k] * da(x[p.a(k)], y[p.b(k)], o[k]);
      }
      grads[0] = Tensor(in[0].shape(), std::move(ga));
    }
    if (needs[1]) {
      std::vector<double> gb(in[1].numel(), 0.0);
      for (size_t k = 0; k < gd.size(); ++k) {
        gb[p.b(k)] += gd[k] * db(x[p.a(k)], y[p.b(k)], o[k]);
      }
      grads[1] = Tensor(in[1].shape(), std::move(gb));
    }
    return grads;
  };
  fns.branches = std::move(branches);
  const Var inputs[] = {a, b};
  return Apply(kind, nullptr, inputs, std::move(fns));
}

// Elementwise unary op; `d(x, y)` is the derivative given input and output.
template <class F, class D>
Var Unary(OpKind kind, const Var& a, F f, D d, OpFunctions::Branches branches = {}) {
  OpFunctions fns;
  fns.forward = [f](std::span<const Tensor> in) {
    const auto x = in[0].data();
    std::vector<double> out(x.size());
    for (size_t k = 0; k < x.size(); ++k) out[k] = f(x[k]);
    return Tensor(in[0].shape(), std::move(out));
  };
  fns.backward = [d](std::span<const Tensor> in, const Tensor& out, const Tensor& g,
                     std::span<const bool>) {
    const auto x = in[0].data();
    const auto y = out.data();
    const auto gd = g.data();
    std::vector<double> gx(x.size());
    for (size_t k = 0; k < x.size(); ++k) gx[k] = gd[k] * d(x[k], y[k]);
    return std::vector<Tensor>{Tensor(in[0].shape(), std::move(gx))};
  };
  fns.branches = std::move(branches);
  const Var inputs[] = {a};
  return Apply(kind, nullptr, inputs, std::move(fns));
}

std::vector<int64_t> SignBranches(std::span<const Tensor> in) {
  std::vector<int64_t> s;
  s.reserve(in[0].numel());
  for (double v : in[0].data()) s.push_back(v > 0 ? 1 : (v < 0 ? -1 : 0));
  return s;
}

double Sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

int NormalizeAxis(int axis, int rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw ShapeError(std::string(op) + ": axis out of range for rank " +
                     std::to_string(rank));
  }
  return axis;
}

// Splits `shape` around `axis` into (outer, n, inner) element counts.
void AxisExtents(const Shape& shape, int axis, int64_t& outer, int64_t& n,
                 int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[d];
  n = shape[axis];
  for (size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
}

// ---------------------------------------------------------------------------
// Pooling and convolution kernels.

struct PoolGeometry {
  int64_t b, c, h, w, oh, ow;
};

PoolGeometry Pool(const Shape& x, int64_t window, int64_t stride, const char* op) {
  if (x.size() != 4) throw ShapeError(std::string(op) + ": expected [B,C,H,W], got " + ShapeToString(x));
  if (window < 1 || stride < 1 || window > x[2] || window > x[3]) {
    throw ShapeError(std::string(op) + ": window " + std::to_string(window) +
                     " does not fit " + ShapeToString(x));
  }
  return {x[0], x[1], x[2], x[3], (x[2] - window) / stride + 1, (x[3] - window) / stride + 1};
}

std::vector<int64_t> ArgmaxRoutes(const Tensor& route, int64_t window, int64_t stride) {
  const PoolGeometry g = Pool(route.shape(), window, stride, "maxpool2d");
  const auto r = route.data();
  std::vector<int64_t> idx(g.b * g.c * g.oh * g.ow);
  int64_t o = 0;
  for (int64_t bc = 0; bc < g.b * g.c; ++bc) {
    const int64_t base = bc * g.h * g.w;
    for (int64_t i = 0; i < g.oh; ++i) {
      for (int64_t j = 0; j < g.ow; ++j) {
        int64_t best = base + (i * stride) * g.w + j * stride;
        for (int64_t u = 0; u < window; ++u) {
          for (int64_t v = 0; v < window; ++v) {
            const int64_t at = base + (i * stride + u) * g.w + (j * stride + v);
            if (r[at] > r[best]) best = at;
          }
        }
        idx[o++] = best;
      }
    }
  }
  return idx;
}

struct ConvGeometry {
  int64_t b, c, h, w, o, kh, kw, oh, ow;
};

ConvGeometry Conv(const Shape& x, const Shape& w, int64_t stride) {
  if (x.size() != 4 || w.size() != 4 || x[1] != w[1] || stride < 1 ||
      w[2] > x[2] || w[3] > x[3]) {
    throw ShapeError(Describe("conv2d", {x, w}) + " stride " + std::to_string(stride));
  }
  return {x[0], x[1], x[2], x[3], w[0], w[2], w[3], (x[2] - w[2]) / stride + 1,
          (x[3] - w[3]) / stride + 1};
}

void Im2Col(const double* img, const ConvGeometry& g, int64_t stride, double* cols) {
  const int64_t npos = g.oh * g.ow;
  for (int64_t c = 0; c < g.c; ++c) {
    for (int64_t u = 0; u < g.kh; ++u) {
      for (int64_t v = 0; v < g.kw; ++v) {
        double* row = cols + ((c * g.kh + u) * g.kw + v) * npos;
        for (int64_t i = 0; i < g.oh; ++i) {
          const double* src = img + (c * g.h + i * stride + u) * g.w + v;
          for (int64_t j = 0; j < g.ow; ++j) row[i * g.ow + j] = src[j * stride];
        }
      }
    }
  }
}

void Col2Im(const double* cols, const ConvGeometry& g, int64_t stride, double* img) {
  const int64_t npos = g.oh * g.ow;
  for (int64_t c = 0; c < g.c; ++c) {
    for (int64_t u = 0; u < g.kh; ++u) {
      for (int64_t v = 0; v < g.kw; ++v) {
        const double* row = cols + ((c * g.kh + u) * g.kw + v) * npos;
        for (int64_t i = 0; i < g.oh; ++i) {
          double* dst = img + (c * g.h + i * stride + u) * g.w + v;
          for (int64_t j = 0; j < g.ow; ++j) dst[j * stride] += row[i * g.ow + j];
        }
      }
    }
  }
}

// Applies an (unnormalized unless `normalize`) DFT along `axis` of a paired
// real tensor [..., 2].
Tensor DftKernel(const Tensor& z, int axis, bool inverse, bool normalize, double scale) {
  const Shape& s = z.shape();
  if (s.size() < 2 || s.back() != 2) {
    throw ShapeError("dft: expected trailing axis of size 2, got " + ShapeToString(s));
  }
  const int data_rank = static_cast<int>(s.size()) - 1;
  axis = NormalizeAxis(axis, data_rank, "dft");
  int64_t outer, n, inner;
  Shape data_shape(s.begin(), s.end() - 1);
  AxisExtents(data_shape, axis, outer, n, inner);
  const auto in = z.data();
  std::vector<double> out(in.size());
  std::vector<std::complex<double>> buf(n);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      for (int64_t t = 0; t < n; ++t) {
        const int64_t at = 2 * ((o * n + t) * inner + i);
        buf[t] = {in[at], in[at + 1]};
      }
      FftInPlace(buf, inverse, normalize);
      for (int64_t t = 0; t < n; ++t) {
        const int64_t at = 2 * ((o * n + t) * inner + i);
        out[at] = buf[t].real() * scale;
        out[at + 1] = buf[t].imag() * scale;
      }
    }
  }
  return Tensor(s, std::move(out));
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise.

Var Add(const Var& a, const Var& b) {
  return Binary(
      OpKind::kAdd, a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Var Subtract(const Var& a, const Var& b) {
  return Binary(
      OpKind::kSubtract, a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Var Multiply(const Var& a, const Var& b) {
  return Binary(
      OpKind::kMultiply, a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Var Divide(const Var& a, const Var& b) {
  for (double v : b.value().data()) {
    if (v == 0.0) throw DomainError("divide: zero denominator entry");
  }
  return Binary(
      OpKind::kDivide, a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double o) { return -o / y; });
}

Var Scale(const Var& a, double factor) {
  OpFunctions fns;
  fns.forward = [factor](std::span<const Tensor> in) {
    std::vector<double> out(in[0].data().begin(), in[0].data().end());
    for (double& v : out) v *= factor;
    return Tensor(in[0].shape(), std::move(out));
  };
  fns.backward = [factor](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                          std::span<const bool>) {
    std::vector<double> out(g.data().begin(), g.data().end());
    for (double& v : out) v *= factor;
    return std::vector<Tensor>{Tensor(in[0].shape(), std::move(out))};
  };
  const Var inputs[] = {a};
  return Apply(OpKind::kScale, nullptr, inputs, std::move(fns));
}

Var Negate(const Var& a) { return Scale(a, -1.0); }

Var Abs(const Var& a) {
  return Unary(
      OpKind::kAbs, a, [](double x) { return std::abs(x); },
      [](double x, double) { return Sign(x); }, SignBranches);
}

Var Relu(const Var& a) {
  return Unary(
      OpKind::kRelu, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; }, SignBranches);
}

Var Sigmoid(const Var& a) {
  return Unary(
      OpKind::kSigmoid, a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var Tanh(const Var& a) {
  return Unary(
      OpKind::kTanh, a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var Exp(const Var& a) {
  return Unary(
      OpKind::kExp, a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var Log(const Var& a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw DomainError("log: nonpositive entry " + std::to_string(v));
  }
  return Unary(
      OpKind::kLog, a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var Power(const Var& a, double exponent) {
  const bool integral = std::floor(exponent) == exponent;
  for (double v : a.value().data()) {
    if (v < 0.0 && !integral) {
      throw DomainError("power: negative base with non-integral exponent");
    }
    if (v == 0.0 && exponent < 0.0) throw DomainError("power: zero base with negative exponent");
  }
  return Unary(
      OpKind::kPower, a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x, double) {
        if (exponent == 0.0) return 0.0;
        return exponent * std::pow(x, exponent - 1.0);
      });
}

// ---------------------------------------------------------------------------
// Reductions.

Var Sum(const Var& a) {
  OpFunctions fns;
  fns.forward = [](std::span<const Tensor> in) {
    double s = 0.0;
    for (double v : in[0].data()) s += v;
    return Tensor::Scalar(s);
  };
  fns.backward = [](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                    std::span<const bool>) {
    return std::vector<Tensor>{Tensor::Full(in[0].shape(), g.item())};
  };
  const Var inputs[] = {a};
  return Apply(OpKind::kSum, nullptr, inputs, std::move(fns));
}

Var Mean(const Var& a) {
  if (a.numel() == 0) throw ShapeError("mean of empty tensor");
  OpFunctions fns;
  fns.forward = [](std::span<const Tensor> in) {
    double s = 0.0;
    for (double v : in[0].data()) s += v;
    return Tensor::Scalar(s / static_cast<double>(in[0].numel()));
  };
  fns.backward = [](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                    std::span<const bool>) {
    return std::vector<Tensor>{
        Tensor::Full(in[0].shape(), g.item() / static_cast<double>(in[0].numel()))};
  };
  const Var inputs[] = {a};
  return Apply(OpKind::kMean, nullptr, inputs, std::move(fns));
}

Var SumAxis(const Var& a, int axis) {
  axis = NormalizeAxis(axis, static_cast<int>(a.shape().size()), "sum_axis");
  OpFunctions fns;
  fns.forward = [axis](std::span<const Tensor> in) {
    int64_t outer, n, inner;
    AxisExtents(in[0].shape(), axis, outer, n, inner);
    Shape shape = in[0].shape();
    shape.erase(shape.begin() + axis);
    const auto x = in[0].data();
    std::vector<double> out(outer * inner, 0.0);
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t t = 0; t < n; ++t)
        for (int64_t i = 0; i < inner; ++i) out[o * inner + i] += x[(o * n + t) * inner + i];
    return Tensor(std::move(shape), std::move(out));
  };
  fns.backward = [axis](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                        std::span<const bool>) {
    int64_t outer, n, inner;
    AxisExtents(in[0].shape(), axis, outer, n, inner);
    const auto gd = g.data();
    std::vector<double> gx(in[0].numel());
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t t = 0; t < n; ++t)
        for (int64_t i = 0; i < inner; ++i) gx[(o * n + t) * inner + i] = gd[o * inner + i];
    return std::vector<Tensor>{Tensor(in[0].shape(), std::move(gx))};
  };
  const Var inputs[] = {a};
  return Apply(OpKind::kSumAxis, nullptr, inputs, std::move(fns));
}

Var L1Norm(const Var& a) {
  OpFunctions fns;
  fns.forward = [](std::span<const Tensor> in) {
    double s = 0.0;
    for (double v : in[0].data()) s += std::abs(v);
    return Tensor::Scalar(s);
  };
  fns.backward = [](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                    std::span<const bool>) {
    std::vector<double> gx(in[0].numel());
    const auto x = in[0].data();
    for (size_t k = 0; k < gx.size(); ++k) gx[k] = g.item() * Sign(x[k]);
    return std::vector<Tensor>{Tensor(in[0].shape(), std::move(gx))};
  };
  fns.branches = SignBranches;
  const Var inputs[] = {a};
  return Apply(OpKind::kL1Norm, nullptr, inputs, std::move(fns));
}

Var L2NormSquared(const Var& a) {
  OpFunctions fns;
  fns.forward = [](std::span<const Tensor> in) {
    double s = 0.0;
    for (double v : in[0].data()) s += v * v;
    return Tensor::Scalar(s);
  };
  fns.backward = [](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                    std::span<const bool>) {
    std::vector<double> gx(in[0].numel());
    const auto x = in[0].data();
    for (size_t k = 0; k < gx.size(); ++k) gx[k] = 2.0 * g.item() * x[k];
    return std::vector<Tensor>{Tensor(in[0].shape(), std::move(gx))};
  };
  const Var inputs[] = {a};
  return Apply(OpKind::kL2NormSquared, nullptr, inputs, std::move(fns));
}

// ---------------------------------------------------------------------------
// Linear algebra.

Var MatMul(const Var& a, const Var& b, bool transpose_b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 ||
      sa[1] != (transpose_b ? sb[1] : sb[0])) {
    throw ShapeError(Describe("matmul", {sa, sb}));
  }
  OpFunctions fns;
  fns.forward = [transpose_b](std::span<const Tensor> in) {
    const Shape& sa = in[0].shape();
    const Shape& sb = in[1].shape();
    ConstMap A(in[0].data().data(), sa[0], sa[1]);
    ConstMap B(in[1].data().data(), sb[0], sb[1]);
    const int64_t n = transpose_b ? sb[0] : sb[1];
    std::vector<double> out(sa[0] * n);
    MutMap C(out.data(), sa[0], n);
    if (transpose_b) {
      C.noalias() = A * B.transpose();
    } else {
      C.noalias() = A * B;
    }
    return Tensor({sa[0], n}, std::move(out));
  };
  fns.backward = [transpose_b](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                               std::span<const bool> needs) {
    const Shape& sa = in[0].shape();
    const Shape& sb = in[1].shape();
    ConstMap A(in[0].data().data(), sa[0], sa[1]);
    ConstMap B(in[1].data().data(), sb[0], sb[1]);
    ConstMap G(g.data().data(), g.shape()[0], g.shape()[1]);
    std::vector<Tensor> grads(2);
    if (needs[0]) {
      std::vector<double> ga(in[0].numel());
      MutMap GA(ga.data(), sa[0], sa[1]);
      if (transpose_b) {
        GA.noalias() = G * B;
      } else {
        GA.noalias() = G * B.transpose();
      }
      grads[0] = Tensor(sa, std::move(ga));
    }
    if (needs[1]) {
      std::vector<double> gb(in[1].numel());
      MutMap GB(gb.data(), sb[0], sb[1]);
      if (transpose_b) {
        GB.noalias() = G.transpose() * A;
      } else {
        GB.noalias() = A.transpose() * G;
      }
      grads[1] = Tensor(sb, std::move(gb));
    }
    return grads;
  };
  const Var inputs[] = {a, b};
  return Apply(OpKind::kMatMul, nullptr, inputs, std::move(fns));
}

Var Conv2d(const Var& x, const Var& w, int64_t stride) {
  Conv(x.shape(), w.shape(), stride);
  OpFunctions fns;
  fns.forward = [stride](std::span<const Tensor> in) {
    const ConvGeometry g = Conv(in[0].shape(), in[1].shape(), stride);
    const int64_t krows = g.c * g.kh * g.kw;
    const int64_t npos = g.oh * g.ow;
    std::vector<double> cols(krows * npos);
    std::vector<double> out(g.b * g.o * npos);
    ConstMap W(in[1].data().data(), g.o, krows);
    for (int64_t bi = 0; bi < g.b; ++bi) {
      Im2Col(in[0].data().data() + bi * g.c * g.h * g.w, g, stride, cols.data());
      MutMap Y(out.data() + bi * g.o * npos, g.o, npos);
      Y.noalias() = W * ConstMap(cols.data(), krows, npos);
    }
    return Tensor({g.b, g.o, g.oh, g.ow}, std::move(out));
  };
  fns.backward = [stride](std::span<const Tensor> in, const Tensor&, const Tensor& grad,
                          std::span<const bool> needs) {
    const ConvGeometry g = Conv(in[0].shape(), in[1].shape(), stride);
    const int64_t krows = g.c * g.kh * g.kw;
    const int64_t npos = g.oh * g.ow;
    ConstMap W(in[1].data().data(), g.o, krows);
    std::vector<double> cols(krows * npos);
    std::vector<double> gx(needs[0] ? in[0].numel() : 0, 0.0);
    std::vector<double> gw(needs[1] ? in[1].numel() : 0, 0.0);
    for (int64_t bi = 0; bi < g.b; ++bi) {
      ConstMap G(grad.data().data() + bi * g.o * npos, g.o, npos);
      if (needs[1]) {
        Im2Col(in[0].data().data() + bi * g.c * g.h * g.w, g, stride, cols.data());
        MutMap(gw.data(), g.o, krows).noalias() +=
            G * ConstMap(cols.data(), krows, npos).transpose();
      }
      if (needs[0]) {
        MutMap(cols.data(), krows, npos).noalias() = W.transpose() * G;
        Col2Im(cols.data(), g, stride, gx.data() + bi * g.c * g.h * g.w);
      }
    }
    std::vector<Tensor> grads(2);
    if (needs[0]) grads[0] = Tensor(in[0].shape(), std::move(gx));
    if (needs[1]) grads[1] = Tensor(in[1].shape(), std::move(gw));
    return grads;
  };
  const Var inputs[] = {x, w};
  return Apply(OpKind::kConv2d, nullptr, inputs, std::move(fns));
}

Var MaxPool2dRouted(const Var& x, const Tensor& route, int64_t window, int64_t stride) {
  if (x.shape() != route.shape()) {
    throw ShapeError(Describe("maxpool2d", {x.shape(), route.shape()}));
  }
  const PoolGeometry geom = Pool(x.shape(), window, stride, "maxpool2d");
  const Shape out_shape{geom.b, geom.c, geom.oh, geom.ow};
  OpFunctions fns;
  fns.forward = [window, stride, out_shape](std::span<const Tensor> in) {
    const auto idx = ArgmaxRoutes(in[1], window, stride);
    const auto x = in[0].data();
    std::vector<double> out(idx.size());
    for (size_t k = 0; k < idx.size(); ++k) out[k] = x[idx[k]];
    return Tensor(out_shape, std::move(out));
  };
  fns.backward = [window, stride](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                                  std::span<const bool>) {
    const auto idx = ArgmaxRoutes(in[1], window, stride);
    std::vector<double> gx(in[0].numel(), 0.0);
    const auto gd = g.data();
    for (size_t k = 0; k < idx.size(); ++k) gx[idx[k]] += gd[k];
    return std::vector<Tensor>{Tensor(in[0].shape(), std::move(gx)), Tensor()};
  };
  fns.branches = [window, stride](std::span<const Tensor> in) {
    return ArgmaxRoutes(in[1], window, stride);
  };
  const Var inputs[] = {x, Var(route)};
  return Apply(OpKind::kMaxPool2d, nullptr, inputs, std::move(fns));
}

Var MaxPool2d(const Var& x, int64_t window, int64_t stride) {
  const PoolGeometry geom = Pool(x.shape(), window, stride, "maxpool2d");
  const Shape out_shape{geom.b, geom.c, geom.oh, geom.ow};
  OpFunctions fns;
  fns.forward = [window, stride, out_shape](std::span<const Tensor> in) {
    const auto idx = ArgmaxRoutes(in[0], window, stride);
    const auto x = in[0].data();
    std::vector<double> out(idx.size());
    for (size_t k = 0; k < idx.size(); ++k) out[k] = x[idx[k]];
    return Tensor(out_shape, std::move(out));
  };
  fns.backward = [window, stride](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                                  std::span<const bool>) {
    const auto idx = ArgmaxRoutes(in[0], window, stride);
    std::vector<double> gx(in[0].numel(), 0.0);
    const auto gd = g.data();
    for (size_t k = 0; k < idx.size(); ++k) gx[idx[k]] += gd[k];
    return std::vector<Tensor>{Tensor(in[0].shape(), std::move(gx))};
  };
  fns.branches = [window, stride](std::span<const Tensor> in) {
    return ArgmaxRoutes(in[0], window, stride);
  };
  const Var inputs[] = {x};
  return Apply(OpKind::kMaxPool2d, nullptr, inputs, std::move(fns));
}

// ---------------------------------------------------------------------------
// Shape manipulation.

Var Reshape(const Var& a, Shape shape) {
  if (NumElements(shape) != a.numel()) {
    throw ShapeError(Describe("reshape", {a.shape(), shape}));
  }
  OpFunctions fns;
  fns.forward = [shape](std::span<const Tensor> in) { return in[0].Reshaped(shape); };
  fns.backward = [](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                    std::span<const bool>) {
    return std::vector<Tensor>{g.Reshaped(in[0].shape())};
  };
  const Var inputs[] = {a};
  return Apply(OpKind::kReshape, nullptr, inputs, std::move(fns));
}

Var Concatenate(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ShapeError("concatenate: no inputs");
  const Shape& first = parts[0].shape();
  axis = NormalizeAxis(axis, static_cast<int>(first.size()), "concatenate");
  for (const Var& p : parts) {
    Shape a = p.shape();
    Shape b = first;
    if (a.size() != b.size()) throw ShapeError(Describe("concatenate", {a, b}));
    a[axis] = b[axis] = 0;
    if (a != b) throw ShapeError(Describe("concatenate", {p.shape(), first}));
  }
  OpFunctions fns;
  fns.forward = [axis](std::span<const Tensor> in) {
    Shape shape = in[0].shape();
    shape[axis] = 0;
    for (const Tensor& t : in) shape[axis] += t.shape()[axis];
    int64_t outer, n, inner;
    AxisExtents(shape, axis, outer, n, inner);
    std::vector<double> out(NumElements(shape));
    int64_t offset = 0;
    for (const Tensor& t : in) {
      const int64_t tn = t.shape()[axis];
      const auto x = t.data();
      for (int64_t o = 0; o < outer; ++o) {
        std::copy(x.begin() + o * tn * inner, x.begin() + (o + 1) * tn * inner,
                  out.begin() + (o * n + offset) * inner);
      }
      offset += tn;
    }
    return Tensor(std::move(shape), std::move(out));
  };
  fns.backward = [axis](std::span<const Tensor> in, const Tensor& out, const Tensor& g,
                        std::span<const bool> needs) {
    int64_t outer, n, inner;
    AxisExtents(out.shape(), axis, outer, n, inner);
    std::vector<Tensor> grads(in.size());
    int64_t offset = 0;
    const auto gd = g.data();
    for (size_t k = 0; k < in.size(); ++k) {
      const int64_t tn = in[k].shape()[axis];
      if (needs[k]) {
        std::vector<double> gx(in[k].numel());
        for (int64_t o = 0; o < outer; ++o) {
          std::copy(gd.begin() + (o * n + offset) * inner,
                    gd.begin() + (o * n + offset + tn) * inner, gx.begin() + o * tn * inner);
        }
        grads[k] = Tensor(in[k].shape(), std::move(gx));
      }
      offset += tn;
    }
    return grads;
  };
  return Apply(OpKind::kConcatenate, nullptr, parts, std::move(fns));
}

Var Narrow(const Var& a, int axis, int64_t start, int64_t length) {
  axis = NormalizeAxis(axis, static_cast<int>(a.shape().size()), "narrow");
  if (start < 0 || length < 0 || start + length > a.shape()[axis]) {
    throw ShapeError("narrow: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") outside " + ShapeToString(a.shape()));
  }
  OpFunctions fns;
  fns.forward = [axis, start, length](std::span<const Tensor> in) {
    int64_t outer, n, inner;
    AxisExtents(in[0].shape(), axis, outer, n, inner);
    Shape shape = in[0].shape();
    shape[axis] = length;
    const auto x = in[0].data();
    std::vector<double> out(outer * length * inner);
    for (int64_t o = 0; o < outer; ++o) {
      std::copy(x.begin() + (o * n + start) * inner, x.begin() + (o * n + start + length) * inner,
                out.begin() + o * length * inner);
    }
    return Tensor(std::move(shape), std::move(out));
  };
  fns.backward = [axis, start, length](std::span<const Tensor> in, const Tensor&,
                                       const Tensor& g, std::span<const bool>) {
    int64_t outer, n, inner;
    AxisExtents(in[0].shape(), axis, outer, n, inner);
    const auto gd = g.data();
    std::vector<double> gx(in[0].numel(), 0.0);
    for (int64_t o = 0; o < outer; ++o) {
      std::copy(gd.begin() + o * length * inner, gd.begin() + (o + 1) * length * inner,
                gx.begin() + (o * n + start) * inner);
    }
    return std::vector<Tensor>{Tensor(in[0].shape(), std::move(gx))};
  };
  const Var inputs[] = {a};
  return Apply(OpKind::kNarrow, nullptr, inputs, std::move(fns));
}

// ---------------------------------------------------------------------------
// Softmax family.

Var Softmax(const Var& a) {
  if (a.shape().empty()) throw ShapeError("softmax of a scalar");
  OpFunctions fns;
  fns.forward = [](std::span<const Tensor> in) {
    const int64_t n = in[0].shape().back();
    const auto x = in[0].data();
    std::vector<double> out(x.size());
    for (size_t r = 0; r < x.size(); r += n) {
      double m = -std::numeric_limits<double>::infinity();
      for (int64_t k = 0; k < n; ++k) m = std::max(m, x[r + k]);
      double s = 0.0;
      for (int64_t k = 0; k < n; ++k) s += (out[r + k] = std::exp(x[r + k] - m));
      for (int64_t k = 0; k < n; ++k) out[r + k] /= s;
    }
    return Tensor(in[0].shape(), std::move(out));
  };
  fns.backward = [](std::span<const Tensor> in, const Tensor& out, const Tensor& g,
                    std::span<const bool>) {
    const int64_t n = in[0].shape().back();
    const auto y = out.data();
    const auto gd = g.data();
    std::vector<double> gx(y.size());
    for (size_t r = 0; r < y.size(); r += n) {
      double dot = 0.0;
      for (int64_t k = 0; k < n; ++k) dot += gd[r + k] * y[r + k];
      for (int64_t k = 0; k < n; ++k) gx[r + k] = y[r + k] * (gd[r + k] - dot);
    }
    return std::vector<Tensor>{Tensor(in[0].shape(), std::move(gx))};
  };
  const Var inputs[] = {a};
  return Apply(OpKind::kSoftmax, nullptr, inputs, std::move(fns));
}

Var LogSoftmax(const Var& a) {
  if (a.shape().empty()) throw ShapeError("log_softmax of a scalar");
  OpFunctions fns;
  fns.forward = [](std::span<const Tensor> in) {
    const int64_t n = in[0].shape().back();
    const auto x = in[0].data();
    std::vector<double> out(x.size());
    for (size_t r = 0; r < x.size(); r += n) {
      double m = -std::numeric_limits<double>::infinity();
      for (int64_t k = 0; k < n; ++k) m = std::max(m, x[r + k]);
      double s = 0.0;
      for (int64_t k = 0; k < n; ++k) s += std::exp(x[r + k] - m);
      const double lse = m + std::log(s);
      for (int64_t k = 0; k < n; ++k) out[r + k] = x[r + k] - lse;
    }
    return Tensor(in[0].shape(), std::move(out));
  };
  fns.backward = [](std::span<const Tensor> in, const Tensor& out, const Tensor& g,
                    std::span<const bool>) {
    const int64_t n = in[0].shape().back();
    const auto y = out.data();
    const auto gd = g.data();
    std::vector<double> gx(y.size());
    for (size_t r = 0; r < y.size(); r += n) {
      double total = 0.0;
      for (int64_t k = 0; k < n; ++k) total += gd[r + k];
      for (int64_t k = 0; k < n; ++k) gx[r + k] = gd[r + k] - std::exp(y[r + k]) * total;
    }
    return std::vector<Tensor>{Tensor(in[0].shape(), std::move(gx))};
  };
  const Var inputs[] = {a};
  return Apply(OpKind::kLogSoftmax, nullptr, inputs, std::move(fns));
}

// ---------------------------------------------------------------------------
// Fourier transforms.

Var Dft(const Var& z, int axis) {
  DftKernel(Tensor::Zeros(Shape(z.shape().begin(), z.shape().end())), axis, false, false, 1.0);
  OpFunctions fns;
  fns.forward = [axis](std::span<const Tensor> in) {
    return DftKernel(in[0], axis, false, false, 1.0);
  };
  fns.backward = [axis](std::span<const Tensor>, const Tensor&, const Tensor& g,
                        std::span<const bool>) {
    // Adjoint of the unnormalized forward transform is the unnormalized inverse.
    return std::vector<Tensor>{DftKernel(g, axis, true, false, 1.0)};
  };
  const Var inputs[] = {z};
  return Apply(OpKind::kDft, nullptr, inputs, std::move(fns));
}

Var InverseDft(const Var& z, int axis) {
  const Shape& s = z.shape();
  if (s.size() < 2 || s.back() != 2) {
    throw ShapeError("inverse_dft: expected trailing axis of size 2, got " + ShapeToString(s));
  }
  OpFunctions fns;
  fns.forward = [axis](std::span<const Tensor> in) {
    return DftKernel(in[0], axis, true, true, 1.0);
  };
  fns.backward = [axis](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                        std::span<const bool>) {
    const int data_rank = static_cast<int>(in[0].shape().size()) - 1;
    const int ax = axis < 0 ? axis + data_rank : axis;
    const double n = static_cast<double>(in[0].shape()[ax]);
    return std::vector<Tensor>{DftKernel(g, axis, false, false, 1.0 / n)};
  };
  const Var inputs[] = {z};
  return Apply(OpKind::kInverseDft, nullptr, inputs, std::move(fns));
}

// ---------------------------------------------------------------------------
// Selection and bias splitting.

Var Where(const Tensor& cond, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) throw ShapeError(Describe("where", {a.shape(), b.shape()}));
  const Broadcast p = MakeBroadcast(cond.shape(), a.shape(), "where");
  if (p.out != a.shape()) throw ShapeError(Describe("where", {cond.shape(), a.shape()}));
  OpFunctions fns;
  fns.forward = [](std::span<const Tensor> in) {
    const Broadcast p = MakeBroadcast(in[0].shape(), in[1].shape(), "where");
    const auto c = in[0].data();
    const auto x = in[1].data();
    const auto y = in[2].data();
    std::vector<double> out(x.size());
    for (size_t k = 0; k < out.size(); ++k) out[k] = c[p.a(k)] != 0.0 ? x[k] : y[k];
    return Tensor(in[1].shape(), std::move(out));
  };
  fns.backward = [](std::span<const Tensor> in, const Tensor&, const Tensor& g,
                    std::span<const bool> needs) {
    const Broadcast p = MakeBroadcast(in[0].shape(), in[1].shape(), "where");
    const auto c = in[0].data();
    const auto gd = g.data();
    std::vector<Tensor> grads(3);
    if (needs[1]) {
      std::vector<double> gx(gd.size());
      for (size_t k = 0; k < gx.size(); ++k) gx[k] = c[p.a(k)] != 0.0 ? gd[k] : 0.0;
      grads[1] = Tensor(in[1].shape(), std::move(gx));
    }
    if (needs[2]) {
      std::vector<double> gy(gd.size());
      for (size_t k = 0; k < gy.size(); ++k) gy[k] = c[p.a(k)] != 0.0 ? 0.0 : gd[k];
      grads[2] = Tensor(in[2].shape(), std::move(gy));
    }
    return grads;
  };
  const Var inputs[] = {Var(cond), a, b};
  return Apply(OpKind::kWhere, nullptr, inputs, std::move(fns));
}

namespace {

enum class RowCase : int64_t { kGeneric = 0, kGammaZero = 1, kBetaZero = 2 };

std::vector<RowCase> ClassifyRows(const Tensor& pb, const Tensor& pg, int64_t rows,
                                  int64_t width) {
  std::vector<RowCase> cases(rows, RowCase::kGeneric);
  const auto b = pb.data();
  const auto g = pg.data();
  for (int64_t r = 0; r < rows; ++r) {
    bool gz = true;
    bool bz = true;
    for (int64_t k = 0; k < width; ++k) {
      gz = gz && g[r * width + k] == 0.0;
      bz = bz && b[r * width + k] == 0.0;
    }
    if (bz) {
      cases[r] = RowCase::kBetaZero;
    } else if (gz) {
      cases[r] = RowCase::kGammaZero;
    }
  }
  return cases;
}

}  // namespace

Var BiasShare(const Var& beta_pre, const Var& gamma_pre) {
  if (beta_pre.shape() != gamma_pre.shape()) {
    throw ShapeError(Describe("bias_share", {beta_pre.shape(), gamma_pre.shape()}));
  }
  auto rows_of = [](const Tensor& t) { return t.rank() == 0 ? int64_t{1} : t.shape()[0]; };
  OpFunctions fns;
  fns.forward = [rows_of](std::span<const Tensor> in) {
    const int64_t rows = rows_of(in[0]);
    const int64_t width = rows == 0 ? 0 : in[0].numel() / rows;
    const auto cases = ClassifyRows(in[0], in[1], rows, width);
    const auto b = in[0].data();
    const auto g = in[1].data();
    std::vector<double> out(b.size());
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t k = r * width; k < (r + 1) * width; ++k) {
        switch (cases[r]) {
          case RowCase::kGammaZero: out[k] = 1.0; break;
          case RowCase::kBetaZero: out[k] = 0.0; break;
          case RowCase::kGeneric: {
            const double s = std::abs(b[k]) + std::abs(g[k]);
            out[k] = s == 0.0 ? 0.5 : std::abs(b[k]) / s;
          }
        }
      }
    }
    return Tensor(in[0].shape(), std::move(out));
  };
  fns.backward = [rows_of](std::span<const Tensor> in, const Tensor&, const Tensor& grad,
                           std::span<const bool> needs) {
    const int64_t rows = rows_of(in[0]);
    const int64_t width = rows == 0 ? 0 : in[0].numel() / rows;
    const auto cases = ClassifyRows(in[0], in[1], rows, width);
    const auto b = in[0].data();
    const auto g = in[1].data();
    const auto gd = grad.data();
    std::vector<double> gb(b.size(), 0.0);
    std::vector<double> gg(b.size(), 0.0);
    for (int64_t r = 0; r < rows; ++r) {
      if (cases[r] != RowCase::kGeneric) continue;
      for (int64_t k = r * width; k < (r + 1) * width; ++k) {
        const double s = std::abs(b[k]) + std::abs(g[k]);
        if (s == 0.0) continue;
        gb[k] = gd[k] * Sign(b[k]) * std::abs(g[k]) / (s * s);
        gg[k] = -gd[k] * Sign(g[k]) * std::abs(b[k]) / (s * s);
      }
    }
    std::vector<Tensor> grads(2);
    if (needs[0]) grads[0] = Tensor(in[0].shape(), std::move(gb));
    if (needs[1]) grads[1] = Tensor(in[1].shape(), std::move(gg));
    return grads;
  };
  fns.branches = [rows_of](std::span<const Tensor> in) {
    const int64_t rows = rows_of(in[0]);
    const int64_t width = rows == 0 ? 0 : in[0].numel() / rows;
    const auto cases = ClassifyRows(in[0], in[1], rows, width);
    std::vector<int64_t> sig;
    for (auto c : cases) sig.push_back(static_cast<int64_t>(c));
    for (double v : in[0].data()) sig.push_back(v > 0 ? 1 : (v < 0 ? -1 : 0));
    for (double v : in[1].data()) sig.push_back(v > 0 ? 1 : (v < 0 ? -1 : 0));
    return sig;
  };
  const Var inputs[] = {beta_pre, gamma_pre};
  return Apply(OpKind::kBiasShare, nullptr, inputs, std::move(fns));
}

// ---------------------------------------------------------------------------

Tensor PrimitiveForward(OpKind kind, std::span<const Tensor> inputs, const OpAttrs& attrs) {
  NoRecordingScope no_record;
  auto arity = [&](size_t n) {
    if (inputs.size() != n) {
      throw InvalidArgument(std::string(OpKindName(kind)) + " expects " + std::to_string(n) +
                            " inputs, got " + std::to_string(inputs.size()));
    }
  };
  auto in = [&](size_t i) { return Var(inputs[i]); };
  switch (kind) {
    case OpKind::kMatMul: arity(2); return MatMul(in(0), in(1), attrs.transpose_b).value();
    case OpKind::kAdd: arity(2); return Add(in(0), in(1)).value();
    case OpKind::kMultiply: arity(2); return Multiply(in(0), in(1)).value();
    case OpKind::kSubtract: arity(2); return Subtract(in(0), in(1)).value();
    case OpKind::kDivide: arity(2); return Divide(in(0), in(1)).value();
    case OpKind::kAbs: arity(1); return Abs(in(0)).value();
    case OpKind::kRelu: arity(1); return Relu(in(0)).value();
    case OpKind::kSigmoid: arity(1); return Sigmoid(in(0)).value();
    case OpKind::kTanh: arity(1); return Tanh(in(0)).value();
    case OpKind::kExp: arity(1); return Exp(in(0)).value();
    case OpKind::kLog: arity(1); return Log(in(0)).value();
    case OpKind::kSum: arity(1); return Sum(in(0)).value();
    case OpKind::kMean: arity(1); return Mean(in(0)).value();
    case OpKind::kSumAxis: arity(1); return SumAxis(in(0), attrs.axis).value();
    case OpKind::kMaxPool2d: arity(1); return MaxPool2d(in(0), attrs.window, attrs.stride).value();
    case OpKind::kConv2d: arity(2); return Conv2d(in(0), in(1), attrs.stride).value();
    case OpKind::kReshape: arity(1); return Reshape(in(0), attrs.shape).value();
    case OpKind::kConcatenate: {
      std::vector<Var> parts(inputs.begin(), inputs.end());
      return Concatenate(parts, attrs.axis).value();
    }
    case OpKind::kNarrow: arity(1); return Narrow(in(0), attrs.axis, attrs.start, attrs.length).value();
    case OpKind::kPower: arity(1); return Power(in(0), attrs.scalar).value();
    case OpKind::kScale: arity(1); return Scale(in(0), attrs.scalar).value();
    case OpKind::kL1Norm: arity(1); return L1Norm(in(0)).value();
    case OpKind::kL2NormSquared: arity(1); return L2NormSquared(in(0)).value();
    case OpKind::kSoftmax: arity(1); return Softmax(in(0)).value();
    case OpKind::kLogSoftmax: arity(1); return LogSoftmax(in(0)).value();
    case OpKind::kDft: arity(1); return Dft(in(0), attrs.axis).value();
    case OpKind::kInverseDft: arity(1); return InverseDft(in(0), attrs.axis).value();
    case OpKind::kBiasShare: arity(2); return BiasShare(in(0), in(1)).value();
    default:
      throw InvalidArgument(std::string("PrimitiveForward: unsupported kind ") + OpKindName(kind));
  }
}

}  // namespace cdlab
