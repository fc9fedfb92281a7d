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

#ifndef CDLAB_TRIM_TRANSFORMS_H_
#define CDLAB_TRIM_TRANSFORMS_H_

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdlab/cd/cd.h"
#include "cdlab/net/network.h"
#include "cdlab/tape.h"
#include "cdlab/tensor.h"

namespace cdlab::trim {

enum class TransformKind { kIdentity, kDft, kDwt, kLinearProjection };

const char* TransformKindName(TransformKind kind);
// Throws InvalidArgument for unknown names.
TransformKind TransformKindFromName(const std::string& name);

// Invertible map T from input space to a transformed space S. Per-sample
// shapes (no batch axis):
//   identity          S = X
//   dft               S = X + [2] (complex as re, im); rank-1 inputs are
//                     transformed along their only axis, higher ranks along
//                     the last two axes
//   dwt               X = [L], S = [L] in the flat scale layout
//   linear-projection X flattened to d, S = [k] with P [k, d]
struct TransformSpec {
  TransformKind kind = TransformKind::kIdentity;
  Shape input_shape;
  Var filter;  // dwt lowpass h; may be a tracked Var
  int levels = 1;
  Tensor projection;                    // P [k, d]
  std::optional<Tensor> pseudo_inverse; // P+ [d, k]
  bool has_residual = false;            // P is not square-invertible

  static TransformSpec Identity(Shape input_shape);
  static TransformSpec Fourier(Shape input_shape);
  static TransformSpec Wavelet(int64_t length, Var filter, int levels);
  // Records P+ computed by a complete orthogonal decomposition.
  static TransformSpec Projection(Shape input_shape, Tensor p);
  // No recorded P+; inversion works only for square nonsingular P.
  static TransformSpec ProjectionWithoutInverse(Shape input_shape, Tensor p);

  Shape TransformedShape() const;
};

// Batched maps over a leading batch axis. Throw ShapeError on
// non-conforming shapes.
Var Forward(const TransformSpec& t, const Var& x);
// Throws DomainError for a projection without a usable inverse.
Var Inverse(const TransformSpec& t, const Var& s);

// Single-sample conveniences (per-sample shapes).
Tensor ApplyTransform(const TransformSpec& t, const Tensor& x);
Tensor InvertTransform(const TransformSpec& t, const Tensor& s);
// r = x - T^-1(T(x)) when the kind has a residual, zeros otherwise.
Tensor Residual(const TransformSpec& t, const Tensor& x);

// Transformed-space coordinates whose frequency lies in [lo, hi); the upper
// edge is included when hi equals the Nyquist frequency. For rank-1 inputs
// of length L the frequency of bin k is min(k, L-k); for higher ranks it is
// the radial frequency over the last two axes. The mask has the dft
// transformed shape. Throws InvalidArgument unless 0 <= lo < hi <= Nyquist.
Tensor BandMask(const Shape& input_shape, double lo, double hi);
double NyquistFrequency(const Shape& input_shape);
// Bins of a rank-1 dft whose frequency is exactly k (k and L-k).
Tensor FrequencyBinMask(int64_t length, int64_t k);

// CD starting point in input space for transformed-space groups:
// beta = T^-1(M * s), gamma = T^-1((1-M) * s) + r. `x` is [B, ...X] and
// `masks` [B, ...S] (or [...S] shared by all rows).
cd::CdPair TrimCdInit(const TransformSpec& t, const Var& x, const Tensor& masks);

// Decomposes the class logit of one sample for each transformed-space mask.
std::vector<cd::CdScore> TrimCdScores(const net::Network& net, const TransformSpec& t,
                                      const Tensor& x, std::span<const Tensor> masks,
                                      int class_index);

// Maps a batch of points [m, ...] to one output per row ([m] or [m, 1]).
using BatchFunction = std::function<Var(const Var&)>;

// Midpoint Riemann sum of the gradient along the straight path from baseline
// to s, times (s - baseline). Throws InvalidArgument when steps < 1.
Tensor IntegratedGradients(const BatchFunction& f, const Tensor& s, const Tensor& baseline,
                           int steps, int chunk = 128);

// f'(s) = logit_c(net(T^-1(s) + r)) for a batch of transformed points.
BatchFunction ReparameterizedLogit(const net::Network& net, const TransformSpec& t,
                                   const Tensor& residual, int class_index);

// Integrated gradients of f' at s = T(x) from a zero baseline; returns an
// attribution over S.
Tensor TrimIntegratedGradients(const net::Network& net, const TransformSpec& t,
                               const Tensor& x, int class_index, int steps = 256);

enum class AttributionMethod { kCd, kIntegratedGradients };
AttributionMethod AttributionMethodFromName(const std::string& name);

// TRIM score of the masked coordinates: the beta logit for CD, the summed
// attribution over the mask for integrated gradients.
double TrimAttribution(const net::Network& net, const TransformSpec& t, const Tensor& x,
                       const Tensor& mask, int class_index, AttributionMethod method,
                       int steps = 256);

}  // namespace cdlab::trim

#endif  // CDLAB_TRIM_TRANSFORMS_H_
