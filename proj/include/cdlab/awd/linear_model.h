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

#ifndef CDLAB_AWD_LINEAR_MODEL_H_
#define CDLAB_AWD_LINEAR_MODEL_H_

#include <span>
#include <vector>

#include "cdlab/tensor.h"

namespace cdlab::awd {

// Ridge regression on standardized features with an unpenalized intercept.
struct RidgeModel {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<double> weights;
  double intercept = 0.0;
  double alpha = 0.0;

  std::vector<double> Predict(const Tensor& features) const;
};

// features [n, p], targets n values. Throws ShapeError on mismatch and
// InvalidArgument for a negative alpha or fewer than two rows.
RidgeModel FitRidge(const Tensor& features, std::span<const double> targets, double alpha);

// Chooses alpha by k-fold cross-validated squared error (contiguous folds,
// earliest alpha wins ties) and refits on all rows.
RidgeModel FitRidgeCv(const Tensor& features, std::span<const double> targets,
                      std::span<const double> alphas, int folds = 5);

// 1 - SS_res / SS_tot; 0 when the targets are constant.
double RSquared(std::span<const double> targets, std::span<const double> predictions);

}  // namespace cdlab::awd

#endif  // CDLAB_AWD_LINEAR_MODEL_H_
