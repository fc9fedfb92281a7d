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

#ifndef CDLAB_NET_NETWORK_H_
#define CDLAB_NET_NETWORK_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdlab/tape.h"
#include "cdlab/tensor.h"

namespace cdlab::net {

enum class LayerKind {
  kLinear,
  kConv2d,
  kRelu,
  kSigmoid,
  kTanh,
  kMaxPool2d,
  kDropout,
  kFlatten,
  kLstm,
};

const char* LayerKindName(LayerKind kind);
// Throws UnsupportedLayerError naming `name` when it is not a known kind.
LayerKind LayerKindFromName(const std::string& name);

// Parameter layouts:
//   linear:  W [out, in], b [out]
//   conv2d:  W [O, C, KH, KW], b [O]
//   lstm:    for each gate in (input, forget, output, candidate):
//            W_x [H, V], W_h [H, H], b [H]   (12 tensors, gate-major)
struct Layer {
  LayerKind kind = LayerKind::kRelu;
  std::vector<Tensor> params;
  int64_t stride = 1;   // conv2d, maxpool2d
  int64_t window = 2;   // maxpool2d
  double rate = 0.0;    // dropout
  int64_t hidden = 0;   // lstm
};

enum class LstmGate { kInput = 0, kForget = 1, kOutput = 2, kCandidate = 3 };

// Ordered composition of layers. `input_shape` excludes the batch axis:
// [d] for vectors, [C, H, W] for images, [T, V] for token sequences. Every
// tensor passed through a network carries a leading batch axis.
struct Network {
  Shape input_shape;
  int64_t num_classes = 0;
  std::vector<Layer> layers;
};

enum class Mode { kEval, kTrain };

// Per-sample output shape of every layer. Throws ShapeInconsistencyError when
// parameters or consecutive layers do not compose, or when the last layer
// does not produce [num_classes].
std::vector<Shape> InferShapes(const Network& net);

// Parameters bound as Vars, one list per layer.
using ParamVars = std::vector<std::vector<Var>>;
ParamVars ConstantParams(const Network& net);
// Registers every parameter as a differentiable leaf of `tape`.
ParamVars TrackParams(const Network& net, Tape& tape);
// Copy of `net` with the parameter values replaced.
Network WithParams(const Network& net, const std::vector<std::vector<Tensor>>& params);

// Inverted-dropout mask for layer `index`: entries are 0 or 1/(1-rate).
Tensor DropoutMask(const Shape& shape, double rate, uint64_t seed, int index);

// Index of the LSTM step rows of `x` [B, T, V] that are entirely zero; such
// steps are absent and leave the state unchanged. Returns a [B, 1] tensor with
// 1 where step t is present.
Tensor PresentSteps(const Tensor& x, int64_t t);

// Runs one layer. `index` seeds the dropout mask.
Var ApplyLayer(const Layer& layer, std::span<const Var> params, const Var& x,
               Mode mode, uint64_t seed, int index);

// Activations of every layer for a batch x [B, ...input_shape]; the last entry
// holds the logits [B, num_classes].
std::vector<Var> Forward(const Network& net, const ParamVars& params, const Var& x,
                         Mode mode = Mode::kEval, uint64_t seed = 0);
std::vector<Tensor> Forward(const Network& net, const Tensor& x, Mode mode = Mode::kEval,
                            uint64_t seed = 0);
Tensor Logits(const Network& net, const Tensor& x);

// Softmax of the eval-mode logits, row by row.
Tensor PredictProba(const Network& net, const Tensor& x);
// Argmax class per row.
std::vector<int> Predict(const Network& net, const Tensor& x);

// Adds a leading axis of size 1.
Tensor AddBatchAxis(const Tensor& x);
// Row `i` of a batch, keeping the batch axis (size 1).
Tensor BatchRow(const Tensor& x, int64_t i);
// Stacks tensors of equal shape along a new leading axis.
Tensor Stack(std::span<const Tensor> rows);

}  // namespace cdlab::net

#endif  // CDLAB_NET_NETWORK_H_
