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

#include "cdlab/cd/cd.h"

#include <algorithm>
#include <cmath>

#include "cdlab/errors.h"
#include "cdlab/ops.h"

namespace cdlab::cd {

using net::Layer;
using net::LayerKind;
using net::Mode;

CdPair CdInit(const Var& x, const FeatureGroup& mask) {
  const Shape& xs = x.shape();
  const Shape& ms = mask.shape();
  const bool per_sample = ms.size() + 1 == xs.size() && std::equal(ms.begin(), ms.end(), xs.begin() + 1);
  if (!per_sample && ms != xs) {
    throw ShapeError("cd_init: mask " + ShapeToString(ms) + " does not match input " +
                     ShapeToString(xs));
  }
  const Var zero(Tensor::Zeros(xs));
  const int64_t rows = xs.empty() ? 1 : xs[0];
  const int64_t width = rows == 0 ? 0 : mask.numel() / (per_sample ? 1 : rows);
  std::vector<double> whole(rows);
  const auto m = mask.data();
  for (int64_t r = 0; r < rows; ++r) {
    const auto row = m.subspan(per_sample ? 0 : r * width, width);
    whole[r] = std::all_of(row.begin(), row.end(), [](double v) { return v != 0.0; }) ? 1.0 : 0.0;
  }
  return {Where(mask, x, zero), Where(mask, zero, x), Tensor({rows}, std::move(whole))};
}

Tensor ZeroRows(const Tensor& t) {
  const int64_t rows = t.rank() == 0 ? 1 : t.shape()[0];
  const int64_t width = rows == 0 ? 0 : t.numel() / rows;
  Shape shape(std::max(t.rank(), 1), 1);
  shape[0] = rows;
  std::vector<double> flags(rows);
  const auto d = t.data();
  for (int64_t r = 0; r < rows; ++r) {
    const auto row = d.subspan(r * width, width);
    flags[r] = std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; }) ? 1.0 : 0.0;
  }
  return Tensor(std::move(shape), std::move(flags));
}

CdPair SplitBias(const Var& wb, const Var& wg, const Var& b, const Tensor& whole) {
  Var share = BiasShare(wb, wg);
  if (whole.defined() && !whole.AllZero()) {
    const int64_t width = share.value().numel() / whole.numel();
    std::vector<double> flags(share.value().numel());
    for (int64_t k = 0; k < static_cast<int64_t>(flags.size()); ++k) flags[k] = whole[k / width];
    share = Where(Tensor(share.shape(), std::move(flags)), Tensor::Full(share.shape(), 1.0), share);
  }
  const Var rest = Subtract(Tensor::Full(share.shape(), 1.0), share);
  return {Add(wb, Multiply(share, b)), Add(wg, Multiply(rest, b))};
}

CdPair CdLinear(const Var& w, const Var& b, const CdPair& pair) {
  return SplitBias(MatMul(pair.beta, w, true), MatMul(pair.gamma, w, true), b, pair.whole);
}

CdPair CdConv2d(const Var& w, const Var& b, int64_t stride, const CdPair& pair) {
  const Var bias = Reshape(b, {w.shape()[0], 1, 1});
  return SplitBias(Conv2d(pair.beta, w, stride), Conv2d(pair.gamma, w, stride), bias,
                   pair.whole);
}

CdPair CdRelu(const CdPair& pair) {
  const Var rb = Relu(pair.beta);
  return {rb, Subtract(Relu(Add(pair.beta, pair.gamma)), rb)};
}

CdPair CdNonlinear(LayerKind kind, const CdPair& pair) {
  auto act = [kind](const Var& v) { return kind == LayerKind::kSigmoid ? Sigmoid(v) : Tanh(v); };
  if (kind != LayerKind::kSigmoid && kind != LayerKind::kTanh) {
    throw UnsupportedLayerError(std::string("cd_nonlinear: ") + net::LayerKindName(kind));
  }
  const double at_zero = kind == LayerKind::kSigmoid ? 0.5 : 0.0;
  const Var total = act(Add(pair.beta, pair.gamma));
  const Var sb = act(pair.beta);
  const Var from_beta = Subtract(sb, Tensor::Scalar(at_zero));
  const Var from_total = Subtract(total, act(pair.gamma));
  Var beta = Scale(Add(from_beta, from_total), 0.5);
  Var gamma = Subtract(total, beta);
  // Rows where only gamma vanishes; when both vanish the symmetric form
  // already leaves beta at zero.
  const Tensor gamma_zero =
      Subtract(ZeroRows(pair.gamma.value()),
               Multiply(ZeroRows(pair.gamma.value()), ZeroRows(pair.beta.value())))
          .value();
  if (!gamma_zero.AllZero()) {
    beta = Where(gamma_zero, sb, beta);
    gamma = Where(gamma_zero, Tensor::Zeros(gamma.shape()), gamma);
  }
  return {beta, gamma};
}

CdPair CdDropout(const CdPair& pair, double rate, Mode mode, uint64_t seed, int index) {
  if (mode == Mode::kEval || rate == 0.0) return pair;
  const Tensor mask = net::DropoutMask(pair.beta.shape(), rate, seed, index);
  return {Multiply(pair.beta, mask), Multiply(pair.gamma, mask)};
}

CdPair CdMaxPool(const CdPair& pair, int64_t window, int64_t stride) {
  const Tensor route = Add(pair.beta.value(), pair.gamma.value()).value();
  return {MaxPool2dRouted(pair.beta, route, window, stride),
          MaxPool2dRouted(pair.gamma, route, window, stride)};
}

CdPair CdProduct(const CdPair& a, const CdPair& b) {
  const Var cross = Scale(Add(Multiply(a.beta, b.gamma), Multiply(a.gamma, b.beta)), 0.5);
  return {Add(Multiply(a.beta, b.beta), cross), Add(Multiply(a.gamma, b.gamma), cross)};
}

namespace {

CdPair Select(const Tensor& present, const CdPair& now, const CdPair& before) {
  return {Where(present, now.beta, before.beta), Where(present, now.gamma, before.gamma)};
}

CdPair CdAdd(const CdPair& a, const CdPair& b) {
  return {Add(a.beta, b.beta), Add(a.gamma, b.gamma)};
}

}  // namespace

CdPair CdLstm(const Layer& layer, std::span<const Var> p, const CdPair& pair,
              std::vector<std::pair<CdPair, CdPair>>* trace) {
  const int64_t b = pair.beta.shape()[0];
  const int64_t steps = pair.beta.shape()[1];
  const int64_t v = pair.beta.shape()[2];
  const int64_t hs = layer.hidden;
  const Tensor x = Add(pair.beta.value(), pair.gamma.value()).value();
  const Var zero(Tensor::Zeros({b, hs}));
  CdPair h{zero, zero};
  CdPair c{zero, zero};
  for (int64_t t = 0; t < steps; ++t) {
    const Tensor present = net::PresentSteps(x, t);
    if (!present.AllZero()) {
      const CdPair xt{Reshape(Narrow(pair.beta, 1, t, 1), {b, v}),
                      Reshape(Narrow(pair.gamma, 1, t, 1), {b, v})};
      auto gate = [&](int g) {
        const Var wb = Add(MatMul(xt.beta, p[3 * g], true), MatMul(h.beta, p[3 * g + 1], true));
        const Var wg = Add(MatMul(xt.gamma, p[3 * g], true), MatMul(h.gamma, p[3 * g + 1], true));
        return SplitBias(wb, wg, p[3 * g + 2], pair.whole);
      };
      const CdPair i = CdNonlinear(LayerKind::kSigmoid, gate(0));
      const CdPair f = CdNonlinear(LayerKind::kSigmoid, gate(1));
      const CdPair o = CdNonlinear(LayerKind::kSigmoid, gate(2));
      const CdPair g = CdNonlinear(LayerKind::kTanh, gate(3));
      const CdPair c_new = CdAdd(CdProduct(f, c), CdProduct(i, g));
      const CdPair h_new = CdProduct(o, CdNonlinear(LayerKind::kTanh, c_new));
      if (std::all_of(present.data().begin(), present.data().end(),
                      [](double e) { return e != 0.0; })) {
        c = c_new;
        h = h_new;
      } else {
        c = Select(present, c_new, c);
        h = Select(present, h_new, h);
      }
    }
    if (trace) trace->emplace_back(h, c);
  }
  return h;
}

CdPair CdLayer(const Layer& layer, std::span<const Var> p, const CdPair& pair, Mode mode,
               uint64_t seed, int index) {
  switch (layer.kind) {
    case LayerKind::kLinear: return CdLinear(p[0], p[1], pair);
    case LayerKind::kConv2d: return CdConv2d(p[0], p[1], layer.stride, pair);
    case LayerKind::kRelu: return CdRelu(pair);
    case LayerKind::kSigmoid:
    case LayerKind::kTanh: return CdNonlinear(layer.kind, pair);
    case LayerKind::kMaxPool2d: return CdMaxPool(pair, layer.window, layer.stride);
    case LayerKind::kDropout: return CdDropout(pair, layer.rate, mode, seed, index);
    case LayerKind::kFlatten: {
      const int64_t b = pair.beta.shape()[0];
      const Shape s{b, pair.beta.numel() / b};
      return {Reshape(pair.beta, s), Reshape(pair.gamma, s)};
    }
    case LayerKind::kLstm: return CdLstm(layer, p, pair);
  }
  throw UnsupportedLayerError(std::string("no decomposition rule for layer kind ") +
                              net::LayerKindName(layer.kind));
}

std::vector<CdPair> CdPropagate(const net::Network& net, const net::ParamVars& params,
                                const CdPair& input, Mode mode, uint64_t seed) {
  std::vector<CdPair> out;
  out.reserve(net.layers.size());
  CdPair cur = input;
  for (int i = 0; i < static_cast<int>(net.layers.size()); ++i) {
    cur = CdLayer(net.layers[i], params[i], cur, mode, seed, i);
    cur.whole = input.whole;
    out.push_back(cur);
  }
  return out;
}

std::vector<CdPair> CdForward(const net::Network& net, const net::ParamVars& params,
                              const Var& x, const FeatureGroup& mask, Mode mode,
                              uint64_t seed) {
  const Shape& xs = x.shape();
  if (xs.size() != net.input_shape.size() + 1 ||
      !std::equal(net.input_shape.begin(), net.input_shape.end(), xs.begin() + 1)) {
    throw ShapeError("cd: input " + ShapeToString(xs) + " does not match [B] + " +
                     ShapeToString(net.input_shape));
  }
  return CdPropagate(net, params, CdInit(x, mask), mode, seed);
}

namespace {

Tensor AsBatch(const net::Network& net, const Tensor& x) {
  if (x.shape() == net.input_shape) return net::AddBatchAxis(x);
  return x;
}

void CheckClass(const net::Network& net, int class_index) {
  if (class_index < 0 || class_index >= net.num_classes) {
    throw InvalidArgument("class index " + std::to_string(class_index) + " out of range");
  }
}

}  // namespace

CdScore ComputeCdScore(const net::Network& net, const Tensor& x, const FeatureGroup& mask,
                       int class_index) {
  const FeatureGroup masks[] = {mask};
  return ComputeCdScores(net, x, masks, class_index)[0];
}

std::vector<CdScore> ComputeCdScores(const net::Network& net, const Tensor& x,
                                     std::span<const FeatureGroup> masks, int class_index) {
  CheckClass(net, class_index);
  const Tensor xb = AsBatch(net, x);
  if (xb.shape()[0] != 1) throw ShapeError("cd score expects a single sample");
  if (masks.empty()) return {};
  for (const FeatureGroup& m : masks) {
    if (m.shape() != net.input_shape) {
      throw ShapeError("cd: mask " + ShapeToString(m.shape()) + " does not match input " +
                       ShapeToString(net.input_shape));
    }
  }
  NoRecordingScope no_record;
  std::vector<Tensor> xs(masks.size(), xb.Reshaped(net.input_shape));
  const Tensor batch = net::Stack(xs);
  const Tensor mask_batch = net::Stack(masks);
  const auto pairs = CdForward(net, net::ConstantParams(net), batch, mask_batch);
  const Tensor& beta = pairs.back().beta.value();
  const Tensor& gamma = pairs.back().gamma.value();
  std::vector<CdScore> out;
  for (size_t k = 0; k < masks.size(); ++k) {
    const int64_t at = static_cast<int64_t>(k) * net.num_classes + class_index;
    out.push_back({beta[at], gamma[at], class_index});
  }
  return out;
}

FeatureGroup DisjointUnion(const FeatureGroup& a, const FeatureGroup& b) {
  if (a.shape() != b.shape()) throw ShapeError("group shapes differ");
  std::vector<double> u(a.numel());
  for (int64_t i = 0; i < a.numel(); ++i) {
    if (a[i] != 0.0 && b[i] != 0.0) throw InvalidArgument("groups overlap at coordinate " +
                                                          std::to_string(i));
    u[i] = (a[i] != 0.0 || b[i] != 0.0) ? 1.0 : 0.0;
  }
  return Tensor(a.shape(), std::move(u));
}

double InteractionScore(const net::Network& net, const Tensor& x, const FeatureGroup& a,
                        const FeatureGroup& b, int class_index) {
  const FeatureGroup masks[] = {DisjointUnion(a, b), a, b};
  const auto s = ComputeCdScores(net, x, masks, class_index);
  return s[0].beta_logit - s[1].beta_logit - s[2].beta_logit;
}

}  // namespace cdlab::cd
