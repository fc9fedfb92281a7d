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

#ifndef CDLAB_CD_CD_H_
#define CDLAB_CD_CD_H_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cdlab/net/network.h"
#include "cdlab/tape.h"

namespace cdlab::cd {

// Decomposition of an activation into the part due to a feature group (beta)
// and the rest (gamma). beta + gamma equals the activation up to rounding.
struct CdPair {
  CdPair() = default;
  CdPair(Var b, Var g, Tensor w = Tensor())
      : beta(std::move(b)), gamma(std::move(g)), whole(std::move(w)) {}

  Var beta;
  Var gamma;
  // Optional per-row flags [B]: 1 where the group is the whole input, so gamma
  // is zero by construction. Bias then goes to beta even when both sides of a
  // row vanish (e.g. every ReLU unit is off).
  Tensor whole;
};

// 0/1 tensor over input coordinates, shaped like the per-sample input (or a
// full batch, one mask per row).
using FeatureGroup = Tensor;

struct CdScore {
  double beta_logit = 0.0;
  double gamma_logit = 0.0;
  int class_index = 0;
};

// beta = x on the group, 0 elsewhere; gamma = x off the group.
CdPair CdInit(const Var& x, const FeatureGroup& mask);

// Per-row flag tensor [B, 1, ..., 1] with 1 where every entry of row b of `t`
// is exactly zero.
Tensor ZeroRows(const Tensor& t);

// Splits bias b between the two sides of the pre-activations wb = W beta and
// wg = W gamma. `b` must broadcast against wb.
CdPair SplitBias(const Var& wb, const Var& wg, const Var& b, const Tensor& whole = Tensor());

// x [B, in], W [out, in], b [out].
CdPair CdLinear(const Var& w, const Var& b, const CdPair& pair);
// x [B, C, H, W], W [O, C, KH, KW], b [O].
CdPair CdConv2d(const Var& w, const Var& b, int64_t stride, const CdPair& pair);
CdPair CdRelu(const CdPair& pair);
// Sigmoid or tanh (`kind` is LayerKind::kSigmoid or kTanh). A row whose gamma
// is exactly zero and whose beta is not maps to (sigma(beta), 0).
CdPair CdNonlinear(net::LayerKind kind, const CdPair& pair);
CdPair CdDropout(const CdPair& pair, double rate, net::Mode mode, uint64_t seed, int index);
// Routes both parts by the argmax of beta + gamma in each window.
CdPair CdMaxPool(const CdPair& pair, int64_t window, int64_t stride);
// Elementwise product of two decomposed factors: beta*beta to beta, gamma*gamma
// to gamma, cross terms split evenly.
CdPair CdProduct(const CdPair& a, const CdPair& b);
// LSTM over a decomposed sequence [B, T, V]; returns the final hidden state.
// Steps whose full input row is zero are absent. If `trace` is non-null it
// receives the (hidden, cell) pairs after each step.
CdPair CdLstm(const net::Layer& layer, std::span<const Var> params, const CdPair& pair,
              std::vector<std::pair<CdPair, CdPair>>* trace = nullptr);

CdPair CdLayer(const net::Layer& layer, std::span<const Var> params, const CdPair& pair,
               net::Mode mode, uint64_t seed, int index);

// Pushes an input-space pair through every layer; one pair per layer.
std::vector<CdPair> CdPropagate(const net::Network& net, const net::ParamVars& params,
                                const CdPair& input, net::Mode mode = net::Mode::kEval,
                                uint64_t seed = 0);
std::vector<CdPair> CdForward(const net::Network& net, const net::ParamVars& params,
                              const Var& x, const FeatureGroup& mask,
                              net::Mode mode = net::Mode::kEval, uint64_t seed = 0);

// Logit-level decomposition of one sample x (per-sample shape, or a batch of
// one) for the group at `class_index`. Throws UnsupportedLayerError through
// the layer dispatch and ShapeError on mismatched shapes.
CdScore ComputeCdScore(const net::Network& net, const Tensor& x, const FeatureGroup& mask,
                       int class_index);

// Scores many groups of the same sample in one batched pass.
std::vector<CdScore> ComputeCdScores(const net::Network& net, const Tensor& x,
                                     std::span<const FeatureGroup> masks, int class_index);

// beta(a u b) - beta(a) - beta(b). Throws InvalidArgument on overlapping groups.
double InteractionScore(const net::Network& net, const Tensor& x, const FeatureGroup& a,
                        const FeatureGroup& b, int class_index);

// Union of two masks; throws InvalidArgument when they overlap.
FeatureGroup DisjointUnion(const FeatureGroup& a, const FeatureGroup& b);

}  // namespace cdlab::cd

#endif  // CDLAB_CD_CD_H_
