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

#include "cdlab/bench/color.h"

#include <string>

#include "cdlab/errors.h"
#include "cdlab/net/model_io.h"
#include "cdlab/random.h"

namespace cdlab::bench {

const std::vector<Color>& ColorPalette() {
  static const std::vector<Color> palette = {
      {1.0, 0.5, 0.0},   {0.0, 0.5, 1.0},   {1.0, 0.0, 0.5},   {0.0, 1.0, 0.5},
      {0.5, 1.0, 0.0},   {0.5, 0.0, 1.0},   {1.0, 0.25, 0.25}, {0.0, 0.75, 0.75},
      {0.25, 1.0, 0.25}, {0.75, 0.0, 0.75},
  };
  return palette;
}

namespace {

// Stroke templates on a b x b box.
bool OnTemplate(int cls, int64_t i, int64_t j, int64_t b) {
  const int64_t mid = b / 2, last = b - 1;
  switch (cls) {
    case 0: return i == mid || i == mid - 1;                      // horizontal bar
    case 1: return j == mid || j == mid - 1;                      // vertical bar
    case 2: return i == mid || j == mid;                          // plus
    case 3: return i == j || i + j == last;                       // cross
    case 4: return i == 0 || j == 0 || i == last || j == last;    // ring
    case 5: return i >= 1 && j >= 1 && i < last && j < last && (i + j) % 2 == 0;  // checker
    case 6: return i == j || i == j + 1;                          // diagonal
    case 7: return j == 0 || i == last;                           // L
    case 8: return i == 0 || j == mid;                            // T
    default: return j == 0 || j == last || i == last;             // U
  }
}

}  // namespace

ColorBiasData MakeColorBiasDataset(int64_t n_per_class, int64_t size, int n_classes,
                                   uint64_t seed) {
  if (size < 8) throw InvalidArgument("color bias: image size must be at least 8");
  if (n_per_class < 1) throw InvalidArgument("color bias: need at least one image per class");
  if (n_classes < 2 || n_classes > static_cast<int>(ColorPalette().size())) {
    throw InvalidArgument("color bias: class count must be in [2, " +
                          std::to_string(ColorPalette().size()) + "]");
  }
  Rng rng = MakeRng(seed, 0xc010);
  const int64_t n = n_per_class * n_classes, plane = size * size;
  const int64_t lo = size / 2, hi = size - 2;  // template box side range
  std::vector<double> train(n * 3 * plane, 0.0), test(n * 3 * plane, 0.0);
  ColorBiasData out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int64_t r = 0; r < n; ++r) {
    const int cls = static_cast<int>(r % n_classes);
    const int64_t b = std::uniform_int_distribution<int64_t>(lo, hi)(rng);
    const int64_t oi = std::uniform_int_distribution<int64_t>(0, size - b)(rng);
    const int64_t oj = std::uniform_int_distribution<int64_t>(0, size - b)(rng);
    const Color& c = ColorPalette()[cls];
    for (int64_t i = 0; i < b; ++i) {
      for (int64_t j = 0; j < b; ++j) {
        const bool keep = unit(rng) >= 0.1;  // stroke dropout
        if (!OnTemplate(cls, i, j, b) || !keep) continue;
        const int64_t p = (oi + i) * size + (oj + j);
        for (int ch = 0; ch < 3; ++ch) {
          train[(r * 3 + ch) * plane + p] = c[ch];
          test[(r * 3 + ch) * plane + p] = 1.0 - c[ch];
        }
      }
    }
    out.train.labels.push_back(cls);
  }
  out.test.labels = out.train.labels;
  out.train.inputs = Tensor({n, 3, size, size}, std::move(train));
  out.test.inputs = Tensor({n, 3, size, size}, std::move(test));
  return out;
}

Tensor Grayscale(const Tensor& images) {
  const int64_t n = images.shape()[0], plane = images.shape()[2] * images.shape()[3];
  std::vector<double> g(n * plane, 0.0);
  const auto x = images.data();
  for (int64_t r = 0; r < n; ++r) {
    for (int64_t p = 0; p < plane; ++p) {
      g[r * plane + p] =
          (x[(r * 3) * plane + p] + x[(r * 3 + 1) * plane + p] + x[(r * 3 + 2) * plane + p]) / 3.0;
    }
  }
  return Tensor({n, images.shape()[2], images.shape()[3]}, std::move(g));
}

ColorBiasConfig DefaultColorBiasConfig() {
  ColorBiasConfig c;
  c.vanilla.learning_rate = 0.05;
  c.vanilla.momentum = 0.9;
  c.vanilla.epochs = 20;
  c.vanilla.batch_size = 32;
  c.vanilla.pixels_per_batch = 0;
  c.cdep = c.vanilla;
  c.cdep.lambda = 2.5;
  c.cdep.pixels_per_batch = 10;
  return c;
}

net::Network ColorClassifier(const ColorBiasConfig& c, uint64_t seed) {
  using net::LayerKind;
  net::Architecture arch;
  arch.input_shape = {3, c.size, c.size};
  arch.num_classes = c.n_classes;
  if (c.architecture == "mlp") {
    arch.layers = {{LayerKind::kFlatten}, {LayerKind::kLinear, c.hidden}, {LayerKind::kRelu},
                   {LayerKind::kLinear, c.n_classes}};
  } else if (c.architecture == "cnn") {
    net::LayerDesc conv{LayerKind::kConv2d, c.channels};
    conv.kernel = 3;
    arch.layers = {conv, {LayerKind::kRelu}, {LayerKind::kMaxPool2d}, {LayerKind::kFlatten},
                   {LayerKind::kLinear, c.hidden}, {LayerKind::kRelu},
                   {LayerKind::kLinear, c.n_classes}};
  } else {
    throw InvalidArgument("color bias: unknown architecture '" + c.architecture + "'");
  }
  return net::InitRandom(arch, seed);
}

ColorBiasResult RunColorBias(const ColorBiasConfig& c) {
  if (c.seeds < 1) throw InvalidArgument("color bias: need at least one seed");
  ColorBiasResult result;
  Rng seeds = MakeRng(c.seed, 0x5eed);
  for (int s = 0; s < c.seeds; ++s) {
    ColorBiasRow row;
    row.seed = seeds();
    const auto data = MakeColorBiasDataset(c.n_per_class, c.size, c.n_classes, row.seed);
    const auto init = ColorClassifier(c, row.seed + 1);
    cdep::TrainConfig vc = c.vanilla;
    vc.lambda = 0.0;
    vc.seed = row.seed;
    const auto vanilla = cdep::Train(init, data.train, vc).net;
    cdep::TrainConfig zc = c.cdep;
    zc.lambda = 0.0;
    zc.seed = row.seed;
    const auto zero = cdep::Train(init, data.train, zc).net;
    row.lambda_zero_identical = true;
    for (size_t l = 0; l < vanilla.layers.size(); ++l) {
      for (size_t p = 0; p < vanilla.layers[l].params.size(); ++p) {
        const auto a = vanilla.layers[l].params[p].data();
        const auto b = zero.layers[l].params[p].data();
        row.lambda_zero_identical &= std::equal(a.begin(), a.end(), b.begin(), b.end());
      }
    }
    cdep::TrainConfig cc = c.cdep;
    cc.seed = row.seed;
    const auto penalized = cdep::Train(init, data.train, cc).net;
    row.vanilla_train = net::Accuracy(vanilla, data.train);
    row.vanilla_test = net::Accuracy(vanilla, data.test);
    row.cdep_train = net::Accuracy(penalized, data.train);
    row.cdep_test = net::Accuracy(penalized, data.test);
    result.vanilla_test_mean += row.vanilla_test / c.seeds;
    result.cdep_test_mean += row.cdep_test / c.seeds;
    result.lambda_zero_identical &= row.lambda_zero_identical;
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace cdlab::bench
