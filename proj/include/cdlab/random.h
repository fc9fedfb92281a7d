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

#ifndef CDLAB_RANDOM_H_
#define CDLAB_RANDOM_H_

#include <cstdint>
#include <random>

#include "cdlab/tensor.h"

namespace cdlab {

using Rng = std::mt19937_64;

// Independent stream derived from a base seed and a stream tag.
Rng MakeRng(uint64_t seed, uint64_t stream = 0);

Tensor UniformTensor(const Shape& shape, double lo, double hi, Rng& rng);
Tensor NormalTensor(const Shape& shape, double mean, double stddev, Rng& rng);

}  // namespace cdlab

#endif  // CDLAB_RANDOM_H_
