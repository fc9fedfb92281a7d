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

#ifndef CDLAB_AWD_DISTILL_H_
#define CDLAB_AWD_DISTILL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdlab/net/network.h"
#include "cdlab/tape.h"
#include "cdlab/tensor.h"

namespace cdlab::awd {

// Squared constraint terms of a lowpass filter h:
//   sum_h     (sum h - sqrt 2)^2
//   sum_g     (sum g)^2
//   norm      (||h||^2 - 1)^2
//   frequency sum over the grid of (|H(w)|^2 + |H(w + pi)|^2 - 2)^2
//   shifts    sum over k in [-(N/2-1), N/2-1] of (sum_n h[n] h[n-2k] - [k=0])^2
// The grid holds `grid_size` uniform frequencies in [0, pi).
struct ConstraintTerms {
  double sum_h = 0.0;
  double sum_g = 0.0;
  double norm = 0.0;
  double frequency = 0.0;
  double shifts = 0.0;
  double Total() const { return sum_h + sum_g + norm + frequency + shifts; }
  // Largest unsquared residual across all terms.
  double max_residual = 0.0;
};

ConstraintTerms EvaluateConstraints(const Tensor& h, int grid_size = 64);
Var ConstraintLoss(const Var& h, int grid_size = 64);

// lambda * mean_i ||Psi x_i||_1 + ConstraintLoss(h), x [m, L].
Var WaveletLoss(const Var& h, const Var& x, double lambda, int levels, int grid_size = 64);
// mean_i ||x_i - Psi^-1 Psi x_i||^2.
Var ReconstructionLoss(const Var& h, const Var& x, int levels);

// TRIM-CD attribution of every wavelet coefficient of every signal through
// f o Psi^-1: entry (i, j) is the beta logit at `class_index` when
// coefficient j of signal i is the group. x [m, L]; returns [m, L].
Var CoefficientAttributions(const net::Network& f, const net::ParamVars& params, const Var& h,
                            const Var& x, int levels, int class_index);
// Sum over signals of the L1 norm of their coefficient attributions. Throws
// ShapeError when f does not accept signals of length L.
Var InterpretationLoss(const net::Network& f, const Var& h, const Var& x, int levels,
                       int class_index);

struct AwdConfig {
  double lambda = 0.005;        // coefficient sparsity weight
  double interp_weight = 0.05;  // interpretation loss weight
  int levels = 4;
  double learning_rate = 5e-4;
  int iterations = 100;
  uint64_t seed = 0;
  int grid_size = 64;
  std::string optimizer = "gd";  // gd or adam
  Tensor init;                     // defaults to Daubechies-5
  double init_noise = 0.0;         // stddev of seeded perturbation of init
  int class_index = 0;
};

void ValidateConfig(const AwdConfig& config);
AwdConfig AwdConfigFromJson(const nlohmann::json& j);
nlohmann::json AwdConfigToJson(const AwdConfig& config);

struct LossComponents {
  double reconstruction = 0.0;
  double wavelet = 0.0;
  double interpretation = 0.0;  // unweighted
  double total = 0.0;
};

// Value of every loss term at h for the signals x [m, L].
LossComponents EvaluateLoss(const net::Network& f, const Tensor& h, const Tensor& x,
                            const AwdConfig& config);

struct DistillResult {
  Tensor filter;
  // history[0] is the initial filter, then one entry per update.
  std::vector<LossComponents> history;
  ConstraintTerms constraints;
};

// Full-batch descent on h over the signals x [m, L]. Throws DivergenceError
// naming the iteration when the loss stops being finite.
DistillResult Distill(const net::Network& f, const Tensor& x, const AwdConfig& config);

// The `per_scale` largest-magnitude coefficients of each scale (ties broken
// by value, larger first), concatenated from approx_J to detail_1. Throws
// InvalidArgument when a scale is shorter than per_scale.
std::vector<double> MaxCoefficientFeatures(const Tensor& coeffs, int levels, int per_scale);

// Fraction of entries with |coefficient| > threshold and |attribution| >
// threshold. Throws ShapeError on mismatched shapes.
double CompressionFactor(const Tensor& coeffs, const Tensor& attributions,
                         double threshold = 1e-3);

nlohmann::json FilterToJson(const Tensor& h, int levels);
Tensor FilterFromJson(const nlohmann::json& j, int* levels = nullptr);

}  // namespace cdlab::awd

#endif  // CDLAB_AWD_DISTILL_H_
