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

#ifndef CDLAB_BENCH_TOYS_H_
#define CDLAB_BENCH_TOYS_H_

#include <cstdint>

#include "cdlab/net/network.h"

namespace cdlab::bench {

// Hand-built two-class network over [n] inputs whose class-1 logit is
//   x_a + x_b + strength * min(x_a, x_b) + sum_i w_i x_i + noise units
// with a = pair_start, b = pair_start + 1. min is realized with ReLUs as
// (x_a + x_b)/2 - (relu(x_a - x_b) + relu(x_b - x_a))/2. The w_i are drawn
// from U(-0.3, 0.3) for the other features and `noise_units` random ReLU
// units with weights of magnitude at most `noise` are added. Inputs are meant
// to lie in [0.5, 1.5].
net::Network PlantedPairNetwork(int64_t n_features, int64_t pair_start, double strength,
                                int noise_units, double noise, uint64_t seed);

// Input drawn from U(0.5, 1.5)^n.
Tensor PlantedPairInput(int64_t n_features, uint64_t seed);

}  // namespace cdlab::bench

#endif  // CDLAB_BENCH_TOYS_H_
