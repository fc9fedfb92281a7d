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

#include "cdlab/bench/toys.h"

#include "cdlab/errors.h"
#include "cdlab/random.h"

namespace cdlab::bench {

net::Network PlantedPairNetwork(int64_t n, int64_t a, double strength, int noise_units,
                                double noise, uint64_t seed) {
  if (n < 2 || a < 0 || a + 1 >= n) throw InvalidArgument("planted pair outside the input");
  Rng rng = MakeRng(seed, 0x7a17);
  const int64_t b = a + 1;
  const int64_t hidden = n + 2 + noise_units;
  std::vector<double> w1(hidden * n, 0.0), b1(hidden, 0.0), w2(2 * hidden, 0.0);
  std::uniform_real_distribution<double> side(-0.3, 0.3), small(-noise, noise);
  for (int64_t i = 0; i < n; ++i) {
    w1[i * n + i] = 1.0;
    w2[hidden + i] = (i == a || i == b) ? 1.0 + strength / 2 : side(rng);
  }
  const int64_t u = n, v = n + 1;
  w1[u * n + a] = 1.0;
  w1[u * n + b] = -1.0;
  w1[v * n + b] = 1.0;
  w1[v * n + a] = -1.0;
  w2[hidden + u] = -strength / 2;
  w2[hidden + v] = -strength / 2;
  for (int k = 0; k < noise_units; ++k) {
    const int64_t row = n + 2 + k;
    for (int64_t i = 0; i < n; ++i) w1[row * n + i] = small(rng);
    b1[row] = small(rng);
    w2[hidden + row] = small(rng);
  }
  net::Network net;
  net.input_shape = {n};
  net.num_classes = 2;
  net.layers = {{net::LayerKind::kLinear, {Tensor({hidden, n}, w1), Tensor({hidden}, b1)}},
                {net::LayerKind::kRelu},
                {net::LayerKind::kLinear, {Tensor({2, hidden}, w2), Tensor::Zeros({2})}}};
  net::InferShapes(net);
  return net;
}

Tensor PlantedPairInput(int64_t n, uint64_t seed) {
  Rng rng = MakeRng(seed, 0x1a2b);
  return UniformTensor({n}, 0.5, 1.5, rng);
}

}  // namespace cdlab::bench
