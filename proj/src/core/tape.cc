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

#include "cdlab/tape.h"

#include <algorithm>

#include "cdlab/errors.h"

namespace cdlab {

namespace {

thread_local Tape* g_active_tape = nullptr;

}  // namespace

const char* OpKindName(OpKind kind) {
  switch (kind) {
    case OpKind::kParameter: return "parameter";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMultiply: return "multiply";
    case OpKind::kSubtract: return "subtract";
    case OpKind::kDivide: return "divide";
    case OpKind::kAbs: return "abs";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSumAxis: return "sum_axis";
    case OpKind::kMaxPool2d: return "maxpool2d";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kReshape: return "reshape";
    case OpKind::kConcatenate: return "concatenate";
    case OpKind::kNarrow: return "narrow";
    case OpKind::kPower: return "power";
    case OpKind::kScale: return "scale";
    case OpKind::kL1Norm: return "l1_norm";
    case OpKind::kL2NormSquared: return "l2_norm_squared";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kDft: return "dft";
    case OpKind::kInverseDft: return "inverse_dft";
    case OpKind::kWhere: return "where";
    case OpKind::kBiasShare: return "bias_share";
    case OpKind::kCustom: return "custom";
  }
  return "unknown";
}

const Tensor& Gradients::operator[](const Var& parameter) const {
  return at(parameter.node());
}

const Tensor& Gradients::at(int node) const {
  auto it = grads_.find(node);
  if (it == grads_.end()) {
    throw InvalidArgument("node " + std::to_string(node) + " is not a parameter");
  }
  return it->second;
}

Var Tape::MakeVar(int id) {
  Var v;
  v.value_ = nodes_[id].value;
  v.node_ = id;
  v.tape_ = this;
  return v;
}

Var Tape::Parameter(Tensor value) {
  nodes_.push_back(Node{OpKind::kParameter, "parameter", {}, std::move(value), {}, true});
  return MakeVar(size() - 1);
}

Var Tape::Constant(Tensor value) {
  nodes_.push_back(Node{OpKind::kConstant, "constant", {}, std::move(value), {}, false});
  return MakeVar(size() - 1);
}

int Tape::Intern(const Var& v) {
  if (v.tape_ == this) return v.node_;
  nodes_.push_back(Node{OpKind::kConstant, "constant", {}, v.value(), {}, false});
  return size() - 1;
}

Var Tape::Record(OpKind kind, const char* name, std::span<const Var> inputs,
                 Tensor value, OpFunctions fns) {
  Node node;
  node.kind = kind;
  node.name = name ? name : OpKindName(kind);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    const int id = Intern(in);
    node.inputs.push_back(id);
    node.requires_grad = node.requires_grad || nodes_[id].requires_grad;
  }
  node.value = std::move(value);
  node.fns = std::move(fns);
  nodes_.push_back(std::move(node));
  return MakeVar(size() - 1);
}

std::vector<int> Tape::parameters() const {
  std::vector<int> ids;
  for (int i = 0; i < size(); ++i) {
    if (nodes_[i].kind == OpKind::kParameter) ids.push_back(i);
  }
  return ids;
}

void Tape::SetLeafValue(int id, Tensor value) {
  Node& n = nodes_.at(id);
  if (n.kind != OpKind::kParameter && n.kind != OpKind::kConstant) {
    throw InvalidArgument("SetLeafValue on non-leaf node " + std::to_string(id));
  }
  if (value.shape() != n.value.shape()) {
    throw ShapeError("SetLeafValue: expected " + ShapeToString(n.value.shape()) +
                     ", got " + ShapeToString(value.shape()));
  }
  n.value = std::move(value);
}

void Tape::Replay() {
  std::vector<Tensor> in;
  for (Node& n : nodes_) {
    if (n.kind == OpKind::kParameter || n.kind == OpKind::kConstant) continue;
    in.clear();
    for (int id : n.inputs) in.push_back(nodes_[id].value);
    n.value = n.fns.forward(in);
  }
}

std::vector<int64_t> Tape::BranchSignature(int upto) const {
  std::vector<int64_t> sig;
  std::vector<Tensor> in;
  for (int i = 0; i <= upto && i < size(); ++i) {
    const Node& n = nodes_[i];
    if (!n.fns.branches) continue;
    in.clear();
    for (int id : n.inputs) in.push_back(nodes_[id].value);
    auto b = n.fns.branches(in);
    sig.push_back(-1 - i);  // separator keeps node boundaries distinct
    sig.insert(sig.end(), b.begin(), b.end());
  }
  return sig;
}

Gradients Tape::Backward(const Var& output) const {
  if (output.tape() != this) {
    throw InvalidArgument("Backward: output is not recorded on this tape");
  }
  if (output.numel() != 1) {
    throw ShapeError("Backward: output must be a scalar, got shape " +
                     ShapeToString(output.shape()));
  }
  const int out = output.node();
  std::vector<std::vector<double>> grads(out + 1);
  grads[out] = {1.0};

  std::vector<Tensor> in;
  std::vector<bool> needs_vec;
  for (int i = out; i >= 0; --i) {
    if (grads[i].empty()) continue;
    const Node& n = nodes_[i];
    if (n.inputs.empty() || !n.requires_grad) continue;
    in.clear();
    needs_vec.clear();
    bool any = false;
    for (int id : n.inputs) {
      in.push_back(nodes_[id].value);
      needs_vec.push_back(nodes_[id].requires_grad);
      any = any || nodes_[id].requires_grad;
    }
    if (!any) continue;
    std::unique_ptr<bool[]> needs(new bool[needs_vec.size()]);
    std::copy(needs_vec.begin(), needs_vec.end(), needs.get());
    Tensor g(n.value.shape(), std::move(grads[i]));
    grads[i].clear();
    auto in_grads = n.fns.backward(in, n.value, g,
                                   std::span<const bool>(needs.get(), needs_vec.size()));
    for (size_t k = 0; k < n.inputs.size(); ++k) {
      if (!needs_vec[k] || k >= in_grads.size() || !in_grads[k].defined()) continue;
      const int id = n.inputs[k];
      auto src = in_grads[k].data();
      auto& dst = grads[id];
      if (dst.empty()) {
        dst.assign(src.begin(), src.end());
      } else {
        for (size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
      }
    }
  }

  Gradients result;
  for (int i = 0; i < size(); ++i) {
    if (nodes_[i].kind != OpKind::kParameter) continue;
    const Shape& shape = nodes_[i].value.shape();
    if (i <= out && !grads[i].empty()) {
      result.grads_[i] = Tensor(shape, std::move(grads[i]));
    } else {
      result.grads_[i] = Tensor::Zeros(shape);
    }
  }
  return result;
}

int64_t Tape::StoredDoubles() const {
  int64_t total = 0;
  for (const Node& n : nodes_) {
    if (n.kind == OpKind::kParameter || n.kind == OpKind::kConstant) continue;
    total += n.value.numel();
  }
  return total;
}

Tape* ActiveTape() { return g_active_tape; }

RecordingScope::RecordingScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}
RecordingScope::~RecordingScope() { g_active_tape = previous_; }

NoRecordingScope::NoRecordingScope() : previous_(g_active_tape) {
  g_active_tape = nullptr;
}
NoRecordingScope::~NoRecordingScope() { g_active_tape = previous_; }

Var Apply(OpKind kind, const char* name, std::span<const Var> inputs,
          OpFunctions fns) {
  std::vector<Tensor> values;
  values.reserve(inputs.size());
  for (const Var& v : inputs) values.push_back(v.value());
  Tensor out = fns.forward(values);
  Tape* tape = ActiveTape();
  if (tape != nullptr) {
    const bool tracked = std::any_of(inputs.begin(), inputs.end(), [&](const Var& v) {
      return v.tape() == tape;
    });
    if (tracked) return tape->Record(kind, name, inputs, std::move(out), std::move(fns));
  }
  return Var(std::move(out));
}

}  // namespace cdlab
