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

#ifndef CDLAB_TAPE_H_
#define CDLAB_TAPE_H_

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cdlab/tensor.h"

namespace cdlab {

enum class OpKind {
  kParameter,
  kConstant,
  kMatMul,
  kAdd,
  kMultiply,
  kSubtract,
  kDivide,
  kAbs,
  kRelu,
  kSigmoid,
  kTanh,
  kExp,
  kLog,
  kSum,
  kMean,
  kSumAxis,
  kMaxPool2d,
  kConv2d,
  kReshape,
  kConcatenate,
  kNarrow,
  kPower,
  kScale,
  kL1Norm,
  kL2NormSquared,
  kSoftmax,
  kLogSoftmax,
  kDft,
  kInverseDft,
  kWhere,
  kBiasShare,
  kCustom,
};

const char* OpKindName(OpKind kind);

// Closures describing one recorded primitive. `forward` recomputes the output
// from input values (used by replay); `backward` maps the output gradient to
// one gradient per input, skipping inputs whose `needs` flag is false.
// `branches` reports the discrete choices taken (kink sides, argmax routes) so
// finite-difference checks can detect when a perturbation crosses a kink.
struct OpFunctions {
  using Forward = std::function<Tensor(std::span<const Tensor> inputs)>;
  using Backward = std::function<std::vector<Tensor>(
      std::span<const Tensor> inputs, const Tensor& output,
      const Tensor& grad_output, std::span<const bool> needs)>;
  using Branches =
      std::function<std::vector<int64_t>(std::span<const Tensor> inputs)>;

  Forward forward;
  Backward backward;
  Branches branches;
};

class Tape;

// A value flowing through computations. Untracked vars (no tape) are plain
// constants; tracked vars refer to a node of the tape that produced them.
class Var {
 public:
  Var() = default;
  Var(Tensor value) : value_(std::move(value)) {}  // NOLINT: implicit constant

  const Tensor& value() const { return value_; }
  const Shape& shape() const { return value_.shape(); }
  int64_t numel() const { return value_.numel(); }
  int node() const { return node_; }
  Tape* tape() const { return tape_; }
  bool tracked() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Tensor value_;
  int node_ = -1;
  Tape* tape_ = nullptr;
};

// Gradients of a scalar with respect to every parameter of a tape.
class Gradients {
 public:
  const Tensor& operator[](const Var& parameter) const;
  const Tensor& at(int node) const;
  const std::map<int, Tensor>& all() const { return grads_; }

 private:
  friend class Tape;
  std::map<int, Tensor> grads_;
};

// Append-only record of primitive operations. Node inputs always reference
// earlier nodes, so the graph is acyclic by construction. A tape belongs to one
// thread.
class Tape {
 public:
  struct Node {
    OpKind kind;
    std::string name;
    std::vector<int> inputs;
    Tensor value;
    OpFunctions fns;
    bool requires_grad = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable leaf.
  Var Parameter(Tensor value);
  // Non-differentiable leaf.
  Var Constant(Tensor value);

  // Records an op whose output `value` was already computed from `inputs`.
  // Inputs not tracked on this tape are added as constants.
  Var Record(OpKind kind, const char* name, std::span<const Var> inputs,
             Tensor value, OpFunctions fns);

  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_.at(id); }
  std::vector<int> parameters() const;

  // Replaces the value of a leaf; call Replay() to propagate.
  void SetLeafValue(int id, Tensor value);
  // Recomputes every non-leaf node in recording order.
  void Replay();
  // Concatenated branch choices of all nodes up to `upto` (inclusive).
  std::vector<int64_t> BranchSignature(int upto) const;

  // Reverse-mode sweep from a single-element output. Parameters the output
  // does not depend on receive zero gradients.
  Gradients Backward(const Var& output) const;

  // Doubles held by recorded node values (memory accounting).
  int64_t StoredDoubles() const;

 private:
  Var MakeVar(int id);
  int Intern(const Var& v);

  std::vector<Node> nodes_;
};

// Tape that ops record onto on the current thread, or nullptr.
Tape* ActiveTape();

// Enables recording onto `tape` for the lifetime of the scope.
class RecordingScope {
 public:
  explicit RecordingScope(Tape& tape);
  ~RecordingScope();
  RecordingScope(const RecordingScope&) = delete;
  RecordingScope& operator=(const RecordingScope&) = delete;

 private:
  Tape* previous_;
};

// Disables recording for the lifetime of the scope.
class NoRecordingScope {
 public:
  NoRecordingScope();
  ~NoRecordingScope();
  NoRecordingScope(const NoRecordingScope&) = delete;
  NoRecordingScope& operator=(const NoRecordingScope&) = delete;

 private:
  Tape* previous_;
};

// Evaluates `fns.forward` on the input values and records the op when a tape
// is active and at least one input is tracked on it.
Var Apply(OpKind kind, const char* name, std::span<const Var> inputs,
          OpFunctions fns);

}  // namespace cdlab

#endif  // CDLAB_TAPE_H_
