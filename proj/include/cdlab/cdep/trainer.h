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

#ifndef CDLAB_CDEP_TRAINER_H_
#define CDLAB_CDEP_TRAINER_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdlab/cd/cd.h"
#include "cdlab/net/dataset.h"
#include "cdlab/net/network.h"
#include "cdlab/random.h"
#include "json.hpp"

namespace cdlab::cdep {

// Desired CD score of a group. `sample` selects one row of the batch; -1
// applies the target to every row.
struct ExplanationTarget {
  int64_t sample = -1;
  cd::FeatureGroup group;
  double value = 0.0;
};

enum class PredictionLoss { kCrossEntropy, kSquaredError };

// Logits whose beta is compared to the target: the row's true class only, or
// every class (the target applies to each).
enum class ExplanationScope { kTrueClass, kAllClasses };

struct LossTerms {
  Var prediction;   // summed over the batch
  Var explanation;  // sum of |beta - target|, before lambda
  Var total;        // prediction + lambda * explanation
};

// Prediction loss plus lambda times the L1 distance between each target
// group's beta and its target value, read at the sample's true-class logit
// or at every logit depending on `scope`.
// For kSquaredError the labels are ignored, `targets` hold one real value per
// row and beta is read at logit 0. Throws ShapeError when a group does not
// match the sample shape.
LossTerms CdepLoss(const net::Network& net, const net::ParamVars& params, const Tensor& batch,
                   std::span<const int> labels, std::span<const double> targets,
                   std::span<const ExplanationTarget> explanations, double lambda,
                   PredictionLoss kind = PredictionLoss::kCrossEntropy,
                   ExplanationScope scope = ExplanationScope::kTrueClass);

struct TrainConfig {
  double lambda = 0.0;
  double learning_rate = 0.01;
  double momentum = 0.0;
  int epochs = 10;
  int batch_size = 32;
  uint64_t seed = 0;
  // Single-pixel groups with target 0 drawn for every batch when positive
  // (image inputs [C, H, W] only); applied to every row of the batch.
  int pixels_per_batch = 10;
  PredictionLoss loss = PredictionLoss::kCrossEntropy;
  ExplanationScope scope = ExplanationScope::kTrueClass;
  // Fixed explanation targets added to every batch (sample = -1 only).
  std::vector<ExplanationTarget> explanations;
};

void ValidateConfig(const TrainConfig& config);
TrainConfig TrainConfigFromJson(const nlohmann::json& j);
nlohmann::json TrainConfigToJson(const TrainConfig& config);

struct EpochStats {
  double prediction = 0.0;   // mean per sample
  double explanation = 0.0;  // mean per sample, before lambda
};

struct TrainResult {
  net::Network net;
  std::vector<EpochStats> history;
};

// Seeded mini-batch gradient descent on CdepLoss; gradients are divided by
// the batch size. Batch order and pixel sampling use separate random streams
// of `seed`, so lambda = 0 reproduces plain training exactly. Throws
// DivergenceError with the epoch index when the loss is not finite.
TrainResult Train(const net::Network& init, const net::Dataset& data, const TrainConfig& config);

// `count` distinct pixel positions of an image [C, H, W], each as a group
// covering every channel. Throws InvalidArgument when count exceeds H * W.
std::vector<cd::FeatureGroup> SamplePixelGroups(const Shape& image_shape, int count, Rng& rng);
std::vector<cd::FeatureGroup> SamplePixelGroups(const Shape& image_shape, int count,
                                                uint64_t seed);

}  // namespace cdlab::cdep

#endif  // CDLAB_CDEP_TRAINER_H_
