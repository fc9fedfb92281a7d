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
#include <Eigen/Dense>

#include "cdlab/awd/dwt.h"
#include "cdlab/errors.h"
#include "cdlab/ops.h"

namespace cdlab::trim {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

int64_t Product(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

Shape WithBatch(int64_t b, const Shape& s) {
  Shape out{b};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

Shape DropBatch(const Shape& s) { return Shape(s.begin() + 1, s.end()); }

void CheckInput(const TransformSpec& t, const Shape& batched) {
  if (batched.empty() || DropBatch(batched) != t.input_shape) {
    throw ShapeError(std::string(TransformKindName(t.kind)) + ": input " +
                     ShapeToString(batched) + " does not conform to " +
                     ShapeToString(t.input_shape) + " with a batch axis");
  }
}

void CheckTransformed(const TransformSpec& t, const Shape& batched) {
  if (batched.empty() || DropBatch(batched) != t.TransformedShape()) {
    throw ShapeError(std::string(TransformKindName(t.kind)) + ": transformed input " +
                     ShapeToString(batched) + " does not conform to " +
                     ShapeToString(t.TransformedShape()) + " with a batch axis");
  }
}

// Axes of the batched complex tensor [B, ...X, 2] that the dft runs along.
std::vector<int> DftAxes(const Shape& input_shape) {
  const int r = static_cast<int>(input_shape.size());
  if (r == 1) return {1};
  return {r - 1, r};
}

RowMatrix ToMatrix(const Tensor& t) {
  return Eigen::Map<const RowMatrix>(t.data().data(), t.shape()[0], t.shape()[1]);
}

Tensor FromMatrix(const RowMatrix& m) {
  return Tensor({m.rows(), m.cols()}, std::vector<double>(m.data(), m.data() + m.size()));
}

Tensor InverseMatrix(const TransformSpec& t) {
  if (t.pseudo_inverse) return *t.pseudo_inverse;
  const RowMatrix p = ToMatrix(t.projection);
  if (p.rows() == p.cols()) {
    Eigen::FullPivLU<RowMatrix> lu(p);
    if (lu.isInvertible()) return FromMatrix(lu.inverse());
  }
  throw DomainError("linear-projection: singular or non-square P without a recorded "
                    "pseudo-inverse");
}

}  // namespace

const char* TransformKindName(TransformKind kind) {
  switch (kind) {
    case TransformKind::kIdentity: return "identity";
    case TransformKind::kDft: return "dft";
    case TransformKind::kDwt: return "dwt";
    case TransformKind::kLinearProjection: return "linear-projection";
  }
  return "unknown";
}

TransformKind TransformKindFromName(const std::string& name) {
  for (auto k : {TransformKind::kIdentity, TransformKind::kDft, TransformKind::kDwt,
                 TransformKind::kLinearProjection}) {
    if (name == TransformKindName(k)) return k;
  }
  throw InvalidArgument("unknown transform kind '" + name + "'");
}

TransformSpec TransformSpec::Identity(Shape input_shape) {
  TransformSpec t;
  t.input_shape = std::move(input_shape);
  return t;
}

TransformSpec TransformSpec::Fourier(Shape input_shape) {
  if (input_shape.empty()) throw InvalidArgument("dft: input shape must be nonempty");
  TransformSpec t;
  t.kind = TransformKind::kDft;
  t.input_shape = std::move(input_shape);
  return t;
}

TransformSpec TransformSpec::Wavelet(int64_t length, Var filter, int levels) {
  awd::CheckDwtShape(filter.numel(), length, levels);
  TransformSpec t;
  t.kind = TransformKind::kDwt;
  t.input_shape = {length};
  t.filter = std::move(filter);
  t.levels = levels;
  return t;
}

TransformSpec TransformSpec::ProjectionWithoutInverse(Shape input_shape, Tensor p) {
  if (p.shape().size() != 2 || p.shape()[1] != Product(input_shape)) {
    throw ShapeError("linear-projection: P " + ShapeToString(p.shape()) +
                     " does not act on inputs of shape " + ShapeToString(input_shape));
  }
  TransformSpec t;
  t.kind = TransformKind::kLinearProjection;
  t.input_shape = std::move(input_shape);
  t.projection = std::move(p);
  return t;
}

TransformSpec TransformSpec::Projection(Shape input_shape, Tensor p) {
  TransformSpec t = ProjectionWithoutInverse(std::move(input_shape), std::move(p));
  const RowMatrix m = ToMatrix(t.projection);
  Eigen::CompleteOrthogonalDecomposition<RowMatrix> cod(m);
  t.pseudo_inverse = FromMatrix(cod.pseudoInverse());
  t.has_residual = !(m.rows() == m.cols() && cod.rank() == m.cols());
  return t;
}

Shape TransformSpec::TransformedShape() const {
  switch (kind) {
    case TransformKind::kIdentity:
    case TransformKind::kDwt:
      return input_shape;
    case TransformKind::kDft: {
      Shape s = input_shape;
      s.push_back(2);
      return s;
    }
    case TransformKind::kLinearProjection:
      return {projection.shape()[0]};
  }
  return input_shape;
}

Var Forward(const TransformSpec& t, const Var& x) {
  CheckInput(t, x.shape());
  const int64_t b = x.shape()[0];
  switch (t.kind) {
    case TransformKind::kIdentity:
      return x;
    case TransformKind::kDft: {
      Shape col = x.shape();
      col.push_back(1);
      const Var re = Reshape(x, col);
      const Var parts[] = {re, Var(Tensor::Zeros(col))};
      Var z = Concatenate(parts, static_cast<int>(col.size()) - 1);
      for (int axis : DftAxes(t.input_shape)) z = Dft(z, axis);
      return z;
    }
    case TransformKind::kDwt:
      return awd::DwtForward(t.filter, x, t.levels);
    case TransformKind::kLinearProjection:
      return MatMul(Reshape(x, {b, Product(t.input_shape)}), t.projection, true);
  }
  return x;
}

Var Inverse(const TransformSpec& t, const Var& s) {
  CheckTransformed(t, s.shape());
  const int64_t b = s.shape()[0];
  switch (t.kind) {
    case TransformKind::kIdentity:
      return s;
    case TransformKind::kDft: {
      Var z = s;
      for (int axis : DftAxes(t.input_shape)) z = InverseDft(z, axis);
      const int last = static_cast<int>(z.shape().size()) - 1;
      return Reshape(Narrow(z, last, 0, 1), WithBatch(b, t.input_shape));
    }
    case TransformKind::kDwt:
      return awd::DwtInverse(t.filter, s, t.levels);
    case TransformKind::kLinearProjection:
      return Reshape(MatMul(s, InverseMatrix(t), true), WithBatch(b, t.input_shape));
  }
  return s;
}

Tensor ApplyTransform(const TransformSpec& t, const Tensor& x) {
  NoRecordingScope off;
  return Forward(t, x.Reshaped(WithBatch(1, x.shape()))).value().Reshaped(t.TransformedShape());
}

Tensor InvertTransform(const TransformSpec& t, const Tensor& s) {
  NoRecordingScope off;
  return Inverse(t, s.Reshaped(WithBatch(1, s.shape()))).value().Reshaped(t.input_shape);
}

Tensor Residual(const TransformSpec& t, const Tensor& x) {
  if (!t.has_residual) return Tensor::Zeros(x.shape());
  NoRecordingScope off;
  return Subtract(x, InvertTransform(t, ApplyTransform(t, x))).value();
}

double NyquistFrequency(const Shape& input_shape) {
  if (input_shape.empty()) throw InvalidArgument("band mask: empty input shape");
  if (input_shape.size() == 1) return static_cast<double>(input_shape[0] / 2);
  const double h = static_cast<double>(input_shape[input_shape.size() - 2] / 2);
  const double w = static_cast<double>(input_shape.back() / 2);
  return std::sqrt(h * h + w * w);
}

Tensor BandMask(const Shape& input_shape, double lo, double hi) {
  const double nyquist = NyquistFrequency(input_shape);
  if (!(lo >= 0.0 && lo < hi && hi <= nyquist + 1e-12)) {
    throw InvalidArgument("band mask: need 0 <= lo < hi <= " + std::to_string(nyquist) +
                          ", got [" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }
  const bool closed = hi >= nyquist - 1e-12;
  auto in_band = [&](double f) {
    return (f >= lo - 1e-12 && f < hi - 1e-12) || (closed && std::abs(f - hi) <= 1e-12);
  };
  Shape shape = input_shape;
  shape.push_back(2);
  std::vector<double> m(Product(shape), 0.0);
  if (input_shape.size() == 1) {
    const int64_t n = input_shape[0];
    for (int64_t k = 0; k < n; ++k) {
      if (!in_band(static_cast<double>(std::min(k, n - k)))) continue;
      m[2 * k] = m[2 * k + 1] = 1.0;
    }
  } else {
    const int64_t h = input_shape[input_shape.size() - 2];
    const int64_t w = input_shape.back();
    const int64_t outer = Product(input_shape) / (h * w);
    for (int64_t i = 0; i < h; ++i) {
      const double fy = static_cast<double>(std::min(i, h - i));
      for (int64_t j = 0; j < w; ++j) {
        const double fx = static_cast<double>(std::min(j, w - j));
        if (!in_band(std::sqrt(fy * fy + fx * fx))) continue;
        for (int64_t o = 0; o < outer; ++o) {
          const int64_t at = 2 * ((o * h + i) * w + j);
          m[at] = m[at + 1] = 1.0;
        }
      }
    }
  }
  return Tensor(std::move(shape), std::move(m));
}

Tensor FrequencyBinMask(int64_t length, int64_t k) {
  if (length <= 0 || k < 0 || k > length / 2) {
    throw InvalidArgument("frequency bin " + std::to_string(k) + " out of range for length " +
                          std::to_string(length));
  }
  std::vector<double> m(2 * length, 0.0);
  m[2 * k] = m[2 * k + 1] = 1.0;
  const int64_t mirror = (length - k) % length;
  m[2 * mirror] = m[2 * mirror + 1] = 1.0;
  return Tensor({length, 2}, std::move(m));
}

cd::CdPair TrimCdInit(const TransformSpec& t, const Var& x, const Tensor& masks) {
  const Var s = Forward(t, x);
  const Var zero(Tensor::Zeros(s.shape()));
  const Var beta_s = Where(masks, s, zero);
  const Var gamma_s = Where(masks, zero, s);
  cd::CdPair pair{Inverse(t, beta_s), Inverse(t, gamma_s)};
  if (t.has_residual) pair.gamma = Add(pair.gamma, Subtract(x, Inverse(t, s)));
  return pair;
}

std::vector<cd::CdScore> TrimCdScores(const net::Network& net, const TransformSpec& t,
                                      const Tensor& x, std::span<const Tensor> masks,
                                      int class_index) {
  if (class_index < 0 || class_index >= net.num_classes) {
    throw InvalidArgument("class index " + std::to_string(class_index) + " out of range");
  }
  if (net.input_shape != t.input_shape) {
    throw ShapeError("trim: transform input " + ShapeToString(t.input_shape) +
                     " does not match network input " + ShapeToString(net.input_shape));
  }
  const Shape sshape = t.TransformedShape();
  for (const Tensor& m : masks) {
    if (m.shape() != sshape) {
      throw ShapeError("trim: mask " + ShapeToString(m.shape()) + " does not match " +
                       ShapeToString(sshape));
    }
  }
  if (masks.empty()) return {};
  if (Product(x.shape()) != Product(t.input_shape)) {
    throw ShapeError("trim: sample " + ShapeToString(x.shape()) + " does not match " +
                     ShapeToString(t.input_shape));
  }
  NoRecordingScope off;
  std::vector<Tensor> xs(masks.size(), x.Reshaped(t.input_shape));
  const cd::CdPair init = TrimCdInit(t, net::Stack(xs), net::Stack(masks));
  const auto pairs = cd::CdPropagate(net, net::ConstantParams(net), init);
  const Tensor& beta = pairs.back().beta.value();
  const Tensor& gamma = pairs.back().gamma.value();
  std::vector<cd::CdScore> out;
  for (size_t k = 0; k < masks.size(); ++k) {
    const int64_t at = static_cast<int64_t>(k) * net.num_classes + class_index;
    out.push_back({beta[at], gamma[at], class_index});
  }
  return out;
}

Tensor IntegratedGradients(const BatchFunction& f, const Tensor& s, const Tensor& baseline,
                           int steps, int chunk) {
  if (steps < 1) throw InvalidArgument("integrated gradients: steps must be at least 1");
  if (s.shape() != baseline.shape()) {
    throw ShapeError("integrated gradients: baseline " + ShapeToString(baseline.shape()) +
                     " does not match " + ShapeToString(s.shape()));
  }
  const int64_t n = s.numel();
  std::vector<double> diff(n), total(n, 0.0);
  for (int64_t i = 0; i < n; ++i) diff[i] = s[i] - baseline[i];
  chunk = std::max(chunk, 1);
  for (int start = 0; start < steps; start += chunk) {
    const int m = std::min(chunk, steps - start);
    std::vector<double> pts(static_cast<size_t>(m) * n);
    for (int r = 0; r < m; ++r) {
      const double alpha = (start + r + 0.5) / steps;
      for (int64_t i = 0; i < n; ++i) pts[r * n + i] = baseline[i] + alpha * diff[i];
    }
    Tape tape;
    RecordingScope rec(tape);
    const Var points = tape.Parameter(Tensor(WithBatch(m, s.shape()), std::move(pts)));
    const Var out = Sum(f(points));
    if (out.tape() != &tape) continue;  // f does not depend on its input
    const Tensor g = tape.Backward(out)[points];
    for (int r = 0; r < m; ++r) {
      for (int64_t i = 0; i < n; ++i) total[i] += g[r * n + i];
    }
  }
  for (int64_t i = 0; i < n; ++i) total[i] = total[i] / steps * diff[i];
  return Tensor(s.shape(), std::move(total));
}

BatchFunction ReparameterizedLogit(const net::Network& net, const TransformSpec& t,
                                   const Tensor& residual, int class_index) {
  if (class_index < 0 || class_index >= net.num_classes) {
    throw InvalidArgument("class index " + std::to_string(class_index) + " out of range");
  }
  auto params = std::make_shared<net::ParamVars>(net::ConstantParams(net));
  const Tensor r = residual.Reshaped(WithBatch(1, t.input_shape));
  return [&net, t, r, params, class_index](const Var& s) {
    Var x = Inverse(t, s);
    if (t.has_residual) x = Add(x, r);
    const Var logits = net::Forward(net, *params, x).back();
    return Narrow(logits, 1, class_index, 1);
  };
}

Tensor TrimIntegratedGradients(const net::Network& net, const TransformSpec& t,
                               const Tensor& x, int class_index, int steps) {
  if (net.input_shape != t.input_shape) {
    throw ShapeError("trim: transform input " + ShapeToString(t.input_shape) +
                     " does not match network input " + ShapeToString(net.input_shape));
  }
  const Tensor xs = x.Reshaped(t.input_shape);
  const Tensor s = ApplyTransform(t, xs);
  const auto f = ReparameterizedLogit(net, t, Residual(t, xs), class_index);
  return IntegratedGradients(f, s, Tensor::Zeros(s.shape()), steps);
}

AttributionMethod AttributionMethodFromName(const std::string& name) {
  if (name == "cd") return AttributionMethod::kCd;
  if (name == "integrated-gradients" || name == "ig") {
    return AttributionMethod::kIntegratedGradients;
  }
  throw InvalidArgument("unsupported attribution method '" + name + "'");
}

double TrimAttribution(const net::Network& net, const TransformSpec& t, const Tensor& x,
                       const Tensor& mask, int class_index, AttributionMethod method,
                       int steps) {
  if (method == AttributionMethod::kCd) {
    const Tensor masks[] = {mask};
    return TrimCdScores(net, t, x, masks, class_index)[0].beta_logit;
  }
  if (mask.shape() != t.TransformedShape()) {
    throw ShapeError("trim: mask " + ShapeToString(mask.shape()) + " does not match " +
                     ShapeToString(t.TransformedShape()));
  }
  const Tensor attr = TrimIntegratedGradients(net, t, x, class_index, steps);
  double total = 0.0;
  for (int64_t i = 0; i < attr.numel(); ++i) total += mask[i] != 0.0 ? attr[i] : 0.0;
  return total;
}

}  // namespace cdlab::trim
