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

#ifndef CDLAB_BENCH_FREQUENCY_H_
#define CDLAB_BENCH_FREQUENCY_H_

#include <cstdint>
#include <string>
#include <vector>

#include "cdlab/net/dataset.h"
#include "cdlab/net/network.h"
#include "cdlab/trim/transforms.h"

namespace cdlab::bench {

struct FrequencyTask {
  net::Dataset data;  // inputs [n, L], labels 0/1
  int planted = 0;    // in [1, L/2 - 1]
};

// i.i.d. standard-normal signals; label 1 iff the DFT magnitude at the
// planted bin exceeds its median over the dataset. Throws InvalidArgument
// unless the length is a power of two of at least 8.
FrequencyTask SimulateFrequencyTask(int64_t n_samples, int64_t signal_length, uint64_t seed);

// Mean over `samples` [m, L] of |TRIM score| of each frequency 0..L/2 at
// `class_index` (one dft group per frequency: bins k and L-k).
std::vector<double> FrequencyScores(const net::Network& net, const Tensor& samples,
                                    trim::AttributionMethod method, int class_index = 1,
                                    int ig_steps = 256);

struct FrequencyConfig {
  int n_datasets = 50;
  int64_t n_samples = 1000;
  int64_t signal_length = 64;
  int64_t hidden = 64;
  int epochs = 30;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int batch_size = 32;
  int eval_samples = 100;
  int ig_steps = 256;
  std::vector<std::string> methods = {"cd", "integrated-gradients"};
  uint64_t seed = 0;
};

struct FrequencyDatasetRow {
  int dataset = 0;
  uint64_t seed = 0;
  int planted = 0;
  double train_accuracy = 0.0;
  bool skipped = false;       // training diverged
  std::vector<int> recovered;  // argmax frequency per method
  std::vector<std::vector<double>> scores;  // per method, frequencies 0..L/2
};

struct FrequencyResult {
  std::vector<std::string> methods;
  std::vector<FrequencyDatasetRow> rows;
  int skipped = 0;
  // Percent of non-skipped datasets whose argmax missed, and its standard
  // error, per method.
  std::vector<double> error_pct;
  std::vector<double> stderr_pct;
};

// Trains a three-layer ReLU network per dataset and scores every frequency
// with each method. Throws InvalidArgument when methods is empty.
FrequencyResult RunFrequencyRecovery(const FrequencyConfig& config);

// Three linear layers with ReLUs in between.
net::Network FrequencyClassifier(int64_t signal_length, int64_t hidden, uint64_t seed);

}  // namespace cdlab::bench

#endif  // CDLAB_BENCH_FREQUENCY_H_
