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

#include "cdlab/net/network.h"

#include <algorithm>
#include <cmath>

#include "cdlab/errors.h"
#include "cdlab/ops.h"
#include "cdlab/random.h"

namespace cdlab::net {

namespace {

[[noreturn]] void Inconsistent(int index, const Layer& layer, const std::string& what) {
  throw ShapeInconsistencyError("layer " + std::to_string(index) + " (" +
                                LayerKindName(layer.kind) + "): " + what);
}

void ExpectParams(int index, const Layer& layer, size_t count) {
  if (layer.params.size() != count) {
    Inconsistent(index, layer, "expected " + std::to_string(count) + " parameter tensors, got " +
                                   std::to_string(layer.params.size()));
  }
}

void ExpectShape(int index, const Layer& layer, size_t which, const Shape& want) {
  if (layer.params[which].shape() != want) {
    Inconsistent(index, layer, "parameter " + std::to_string(which) + " has shape " +
                                   ShapeToString(layer.params[which].shape()) + ", expected " +
                                   ShapeToString(want));
  }
}

}  // namespace

const char* LayerKindName(LayerKind kind) {
  switch (kind) {
    case LayerKind::kLinear: return "linear";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kTanh: return "tanh";
    case LayerKind::kMaxPool2d: return "maxpool2d";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kLstm: return "lstm";
  }
  return "unknown";
}

LayerKind LayerKindFromName(const std::string& name) {
  for (LayerKind k : {LayerKind::kLinear, LayerKind::kConv2d, LayerKind::kRelu,
                      LayerKind::kSigmoid, LayerKind::kTanh, LayerKind::kMaxPool2d,
                      LayerKind::kDropout, LayerKind::kFlatten, LayerKind::kLstm}) {
    if (name == LayerKindName(k)) return k;
  }
  throw UnsupportedLayerError("unsupported layer kind '" + name + "'");
}

std::vector<Shape> InferShapes(const Network& net) {
  if (net.input_shape.empty()) throw ShapeInconsistencyError("empty input shape");
  for (int64_t d : net.input_shape) {
    if (d <= 0) throw ShapeInconsistencyError("nonpositive input dimension");
  }
  std::vector<Shape> shapes;
  Shape s = net.input_shape;
  for (int i = 0; i < static_cast<int>(net.layers.size()); ++i) {
    const Layer& l = net.layers[i];
    switch (l.kind) {
      case LayerKind::kLinear: {
        ExpectParams(i, l, 2);
        if (s.size() != 1) Inconsistent(i, l, "input " + ShapeToString(s) + " is not a vector");
        const Shape& w = l.params[0].shape();
        if (w.size() != 2 || w[1] != s[0]) {
          Inconsistent(i, l, "weight " + ShapeToString(w) + " does not accept " + ShapeToString(s));
        }
        ExpectShape(i, l, 1, {w[0]});
        s = {w[0]};
        break;
      }
      case LayerKind::kConv2d: {
        ExpectParams(i, l, 2);
        const Shape& w = l.params[0].shape();
        if (s.size() != 3 || w.size() != 4 || w[1] != s[0] || w[2] > s[1] || w[3] > s[2] ||
            l.stride < 1) {
          Inconsistent(i, l, "weight " + ShapeToString(w) + " does not accept " + ShapeToString(s));
        }
        ExpectShape(i, l, 1, {w[0]});
        s = {w[0], (s[1] - w[2]) / l.stride + 1, (s[2] - w[3]) / l.stride + 1};
        break;
      }
      case LayerKind::kMaxPool2d:
        ExpectParams(i, l, 0);
        if (s.size() != 3 || l.window < 1 || l.stride < 1 || l.window > s[1] || l.window > s[2]) {
          Inconsistent(i, l, "window does not fit " + ShapeToString(s));
        }
        s = {s[0], (s[1] - l.window) / l.stride + 1, (s[2] - l.window) / l.stride + 1};
        break;
      case LayerKind::kDropout:
        ExpectParams(i, l, 0);
        if (!(l.rate >= 0.0 && l.rate < 1.0)) Inconsistent(i, l, "rate outside [0, 1)");
        break;
      case LayerKind::kRelu:
      case LayerKind::kSigmoid:
      case LayerKind::kTanh:
        ExpectParams(i, l, 0);
        break;
      case LayerKind::kFlatten:
        ExpectParams(i, l, 0);
        s = {NumElements(s)};
        break;
      case LayerKind::kLstm: {
        ExpectParams(i, l, 12);
        if (s.size() != 2) Inconsistent(i, l, "input " + ShapeToString(s) + " is not [T, V]");
        const int64_t h = l.hidden;
        if (h <= 0) Inconsistent(i, l, "hidden size must be positive");
        for (int g = 0; g < 4; ++g) {
          ExpectShape(i, l, 3 * g, {h, s[1]});
          ExpectShape(i, l, 3 * g + 1, {h, h});
          ExpectShape(i, l, 3 * g + 2, {h});
        }
        s = {h};
        break;
      }
    }
    shapes.push_back(s);
  }
  if (s != Shape{net.num_classes}) {
    throw ShapeInconsistencyError("network output " + ShapeToString(s) +
                                  " does not match num_classes " +
                                  std::to_string(net.num_classes));
  }
  return shapes;
}

ParamVars ConstantParams(const Network& net) {
  ParamVars out;
  for (const Layer& l : net.layers) out.emplace_back(l.params.begin(), l.params.end());
  return out;
}

ParamVars TrackParams(const Network& net, Tape& tape) {
  ParamVars out;
  for (const Layer& l : net.layers) {
    std::vector<Var> vars;
    for (const Tensor& p : l.params) vars.push_back(tape.Parameter(p));
    out.push_back(std::move(vars));
  }
  return out;
}

Network WithParams(const Network& net, const std::vector<std::vector<Tensor>>& params) {
  if (params.size() != net.layers.size()) {
    throw ShapeInconsistencyError("parameter list does not match layer count");
  }
  Network out = net;
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != out.layers[i].params.size()) {
      throw ShapeInconsistencyError("parameter count mismatch in layer " + std::to_string(i));
    }
    for (size_t k = 0; k < params[i].size(); ++k) {
      if (params[i][k].shape() != out.layers[i].params[k].shape()) {
        throw ShapeInconsistencyError("parameter shape mismatch in layer " + std::to_string(i));
      }
      out.layers[i].params[k] = params[i][k];
    }
  }
  return out;
}

Tensor DropoutMask(const Shape& shape, double rate, uint64_t seed, int index) {
  Rng rng = MakeRng(seed, 0x5eed0000ULL + static_cast<uint64_t>(index));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 / (1.0 - rate);
  std::vector<double> m(NumElements(shape));
  for (double& v : m) v = u(rng) < rate ? 0.0 : keep;
  return Tensor(shape, std::move(m));
}

Tensor PresentSteps(const Tensor& x, int64_t t) {
  const int64_t b = x.shape()[0];
  const int64_t steps = x.shape()[1];
  const int64_t v = x.shape()[2];
  std::vector<double> present(b, 0.0);
  const auto d = x.data();
  for (int64_t r = 0; r < b; ++r) {
    const double* row = d.data() + (r * steps + t) * v;
    present[r] = std::any_of(row, row + v, [](double e) { return e != 0.0; }) ? 1.0 : 0.0;
  }
  return Tensor({b, 1}, std::move(present));
}

namespace {

Var LstmGatePre(std::span<const Var> p, int gate, const Var& xt, const Var& h) {
  return Add(Add(MatMul(xt, p[3 * gate], true), MatMul(h, p[3 * gate + 1], true)),
             p[3 * gate + 2]);
}

Var RunLstm(const Layer& layer, std::span<const Var> p, const Var& x) {
  const int64_t b = x.shape()[0];
  const int64_t steps = x.shape()[1];
  const int64_t v = x.shape()[2];
  const int64_t hsize = layer.hidden;
  Var h(Tensor::Zeros({b, hsize}));
  Var c(Tensor::Zeros({b, hsize}));
  for (int64_t t = 0; t < steps; ++t) {
    const Tensor present = PresentSteps(x.value(), t);
    if (present.AllZero()) continue;
    const Var xt = Reshape(Narrow(x, 1, t, 1), {b, v});
    const Var i = Sigmoid(LstmGatePre(p, 0, xt, h));
    const Var f = Sigmoid(LstmGatePre(p, 1, xt, h));
    const Var o = Sigmoid(LstmGatePre(p, 2, xt, h));
    const Var g = Tanh(LstmGatePre(p, 3, xt, h));
    const Var c_new = Add(Multiply(f, c), Multiply(i, g));
    const Var h_new = Multiply(o, Tanh(c_new));
    if (std::all_of(present.data().begin(), present.data().end(),
                    [](double e) { return e != 0.0; })) {
      c = c_new;
      h = h_new;
    } else {
      c = Where(present, c_new, c);
      h = Where(present, h_new, h);
    }
  }
  return h;
}

}  // namespace

Var ApplyLayer(const Layer& layer, std::span<const Var> p, const Var& x, Mode mode,
               uint64_t seed, int index) {
  switch (layer.kind) {
    case LayerKind::kLinear:
      return Add(MatMul(x, p[0], true), p[1]);
    case LayerKind::kConv2d: {
      const int64_t o = p[0].shape()[0];
      return Add(Conv2d(x, p[0], layer.stride), Reshape(p[1], {o, 1, 1}));
    }
    case LayerKind::kRelu: return Relu(x);
    case LayerKind::kSigmoid: return Sigmoid(x);
    case LayerKind::kTanh: return Tanh(x);
    case LayerKind::kMaxPool2d: return MaxPool2d(x, layer.window, layer.stride);
    case LayerKind::kDropout:
      if (mode == Mode::kEval || layer.rate == 0.0) return x;
      return Multiply(x, DropoutMask(x.shape(), layer.rate, seed, index));
    case LayerKind::kFlatten: {
      const int64_t b = x.shape()[0];
      return Reshape(x, {b, x.numel() / b});
    }
    case LayerKind::kLstm:
      return RunLstm(layer, p, x);
  }
  throw UnsupportedLayerError("unsupported layer kind");
}

namespace {

void CheckInput(const Network& net, const Shape& x) {
  if (x.size() != net.input_shape.size() + 1 ||
      !std::equal(net.input_shape.begin(), net.input_shape.end(), x.begin() + 1)) {
    throw ShapeError("network input " + ShapeToString(x) + " does not match [B] + " +
                     ShapeToString(net.input_shape));
  }
}

}  // namespace

std::vector<Var> Forward(const Network& net, const ParamVars& params, const Var& x, Mode mode,
                         uint64_t seed) {
  CheckInput(net, x.shape());
  std::vector<Var> acts;
  acts.reserve(net.layers.size());
  Var h = x;
  for (int i = 0; i < static_cast<int>(net.layers.size()); ++i) {
    h = ApplyLayer(net.layers[i], params[i], h, mode, seed, i);
    acts.push_back(h);
  }
  return acts;
}

std::vector<Tensor> Forward(const Network& net, const Tensor& x, Mode mode, uint64_t seed) {
  NoRecordingScope no_record;
  const auto acts = Forward(net, ConstantParams(net), Var(x), mode, seed);
  std::vector<Tensor> out;
  for (const Var& a : acts) out.push_back(a.value());
  return out;
}

Tensor Logits(const Network& net, const Tensor& x) {
  if (net.layers.empty()) {
    CheckInput(net, x.shape());
    return x;
  }
  return Forward(net, x).back();
}

Tensor PredictProba(const Network& net, const Tensor& x) {
  NoRecordingScope no_record;
  return Softmax(Logits(net, x)).value();
}

std::vector<int> Predict(const Network& net, const Tensor& x) {
  const Tensor logits = Logits(net, x);
  const int64_t n = logits.shape()[1];
  std::vector<int> out;
  for (int64_t r = 0; r < logits.shape()[0]; ++r) {
    const auto row = logits.data().subspan(r * n, n);
    out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

Tensor AddBatchAxis(const Tensor& x) {
  Shape s = x.shape();
  s.insert(s.begin(), 1);
  return x.Reshaped(std::move(s));
}

Tensor BatchRow(const Tensor& x, int64_t i) {
  Shape s = x.shape();
  const int64_t width = x.numel() / s[0];
  s[0] = 1;
  const auto d = x.data().subspan(i * width, width);
  return Tensor(std::move(s), std::vector<double>(d.begin(), d.end()));
}

Tensor Stack(std::span<const Tensor> rows) {
  if (rows.empty()) throw ShapeError("stack of no tensors");
  Shape s = rows[0].shape();
  std::vector<double> data;
  data.reserve(rows.size() * rows[0].numel());
  for (const Tensor& r : rows) {
    if (r.shape() != s) throw ShapeError("stack: " + ShapeToString(r.shape()) + " vs " +
                                         ShapeToString(s));
    data.insert(data.end(), r.data().begin(), r.data().end());
  }
  s.insert(s.begin(), static_cast<int64_t>(rows.size()));
  return Tensor(std::move(s), std::move(data));
}

}  // namespace cdlab::net
