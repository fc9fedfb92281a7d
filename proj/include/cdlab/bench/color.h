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

#ifndef CDLAB_BENCH_COLOR_H_
#define CDLAB_BENCH_COLOR_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cdlab/cdep/trainer.h"
#include "cdlab/net/dataset.h"
#include "cdlab/net/network.h"

namespace cdlab::bench {

using Color = std::array<double, 3>;

// Ten colors with channel mean 0.5, closed under c -> 1 - c. Color 2k + 1 is
// the inverse of color 2k.
const std::vector<Color>& ColorPalette();

struct ColorBiasData {
  net::Dataset train;  // images [n, 3, size, size], class k drawn in color k
  net::Dataset test;   // same shapes and labels, colors inverted
};

// n_per_class jittered copies of a per-class stroke template on a black
// background. Throws InvalidArgument when size < 8, n_per_class < 1 or
// n_classes is outside [2, 10].
ColorBiasData MakeColorBiasDataset(int64_t n_per_class, int64_t size, int n_classes,
                                   uint64_t seed);

// Mean over channels, shape [n, size, size].
Tensor Grayscale(const Tensor& images);

struct ColorBiasConfig {
  int64_t n_per_class = 50;
  int64_t size = 16;
  int n_classes = 10;
  int64_t hidden = 64;
  std::string architecture = "cnn";  // "mlp" or "cnn"
  int64_t channels = 8;              // cnn only
  int seeds = 5;
  uint64_t seed = 0;
  cdep::TrainConfig vanilla;  // lambda forced to 0
  cdep::TrainConfig cdep;
};

ColorBiasConfig DefaultColorBiasConfig();

struct ColorBiasRow {
  uint64_t seed = 0;
  double vanilla_train = 0.0;
  double vanilla_test = 0.0;
  double cdep_train = 0.0;
  double cdep_test = 0.0;
  bool lambda_zero_identical = false;  // lambda = 0 cdep run equals vanilla
};

struct ColorBiasResult {
  std::vector<ColorBiasRow> rows;
  double vanilla_test_mean = 0.0;
  double cdep_test_mean = 0.0;
  bool lambda_zero_identical = true;
};

// "mlp": flatten, linear(hidden), relu, linear. "cnn": conv 3x3 (channels),
// relu, max-pool 2, flatten, linear(hidden), relu, linear. Throws
// InvalidArgument on another name.
net::Network ColorClassifier(const ColorBiasConfig& config, uint64_t seed);

// Trains vanilla and penalized models per seed and evaluates on the
// inverted-color split.
ColorBiasResult RunColorBias(const ColorBiasConfig& config);

}  // namespace cdlab::bench

#endif  // CDLAB_BENCH_COLOR_H_
