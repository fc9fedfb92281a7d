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

#ifndef CDLAB_BENCH_MOTIF_H_
#define CDLAB_BENCH_MOTIF_H_

#include <cstdint>
#include <vector>

#include "cdlab/awd/distill.h"
#include "cdlab/cdep/trainer.h"
#include "cdlab/net/dataset.h"
#include "cdlab/net/network.h"

namespace cdlab::bench {

// Gaussian-noise traces of length L; half carry a linear rise of random
// length and amplitude followed by an immediate drop to baseline. Inputs
// [n, L]; label 1 when the motif is present; target = amplitude (0 if absent).
// Throws InvalidArgument unless L is a power of two of at least 64.
net::Dataset MakeMotifTask(int64_t n_samples, int64_t length, uint64_t seed);

struct MotifConfig {
  int64_t n_train = 400;
  int64_t n_test = 200;
  int64_t length = 128;
  int64_t hidden = 32;
  int64_t distill_signals = 64;  // training traces used to fit the filter
  int per_scale = 6;
  std::vector<double> alphas = {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  int seeds = 5;
  uint64_t seed = 0;
  cdep::TrainConfig teacher;
  awd::AwdConfig awd;
};

MotifConfig DefaultMotifConfig();

// Linear, relu, linear with one output.
net::Network MotifTeacher(int64_t length, int64_t hidden, uint64_t seed);

struct FilterScore {
  double compression = 0.0;  // on the test split
  double r2 = 0.0;           // ridge on max-coefficient features, test split
};

// Compression factor of h against the teacher's coefficient attributions and
// test R^2 of a cross-validated ridge fit on max-coefficient features.
FilterScore ScoreFilter(const net::Network& teacher, const Tensor& h, const net::Dataset& train,
                        const net::Dataset& test, const MotifConfig& config);

struct MotifRow {
  uint64_t seed = 0;
  double teacher_r2 = 0.0;
  FilterScore initial;
  FilterScore learned;
  double constraint_residual = 0.0;  // of the learned filter
  Tensor filter;
};

struct MotifResult {
  std::vector<MotifRow> rows;
  // Seeds where the learned filter compresses strictly better, and where its
  // R^2 is at least the initial filter's.
  int compression_wins = 0;
  int r2_wins = 0;
};

MotifResult RunMotif(const MotifConfig& config);

}  // namespace cdlab::bench

#endif  // CDLAB_BENCH_MOTIF_H_
