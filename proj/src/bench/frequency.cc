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

#include "cdlab/bench/frequency.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cdlab/cdep/trainer.h"
#include "cdlab/errors.h"
#include "cdlab/fft.h"
#include "cdlab/net/model_io.h"
#include "cdlab/random.h"

namespace cdlab::bench {

FrequencyTask SimulateFrequencyTask(int64_t n_samples, int64_t signal_length, uint64_t seed) {
  if (signal_length < 8 || !IsPowerOfTwo(signal_length)) {
    throw InvalidArgument("frequency task: signal length must be a power of two >= 8, got " +
                          std::to_string(signal_length));
  }
  if (n_samples < 2) throw InvalidArgument("frequency task: need at least two samples");
  Rng rng = MakeRng(seed, 0xf4e9);
  FrequencyTask task;
  task.planted =
      std::uniform_int_distribution<int>(1, static_cast<int>(signal_length / 2) - 1)(rng);
  task.data.inputs = NormalTensor({n_samples, signal_length}, 0.0, 1.0, rng);
  const auto x = task.data.inputs.data();
  std::vector<double> mag(n_samples);
  for (int64_t i = 0; i < n_samples; ++i) {
    double re = 0.0, im = 0.0;
    for (int64_t t = 0; t < signal_length; ++t) {
      const double angle =
          -2.0 * std::numbers::pi * static_cast<double>((task.planted * t) % signal_length) /
          static_cast<double>(signal_length);
      re += x[i * signal_length + t] * std::cos(angle);
      im += x[i * signal_length + t] * std::sin(angle);
    }
    mag[i] = std::hypot(re, im);
  }
  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  const double median = n_samples % 2 ? sorted[n_samples / 2]
                                      : 0.5 * (sorted[n_samples / 2 - 1] + sorted[n_samples / 2]);
  for (double m : mag) task.data.labels.push_back(m > median ? 1 : 0);
  return task;
}

std::vector<double> FrequencyScores(const net::Network& net, const Tensor& samples,
                                    trim::AttributionMethod method, int class_index,
                                    int ig_steps) {
  const int64_t m = samples.shape()[0];
  const int64_t len = samples.shape()[1];
  const auto t = trim::TransformSpec::Fourier({len});
  std::vector<Tensor> masks;
  for (int64_t f = 0; f <= len / 2; ++f) masks.push_back(trim::FrequencyBinMask(len, f));
  std::vector<double> scores(masks.size(), 0.0);
  for (int64_t i = 0; i < m; ++i) {
    const Tensor x = net::BatchRow(samples, i).Reshaped({len});
    if (method == trim::AttributionMethod::kCd) {
      const auto s = trim::TrimCdScores(net, t, x, masks, class_index);
      for (size_t f = 0; f < masks.size(); ++f) scores[f] += std::abs(s[f].beta_logit);
    } else {
      const Tensor attr = trim::TrimIntegratedGradients(net, t, x, class_index, ig_steps);
      for (size_t f = 0; f < masks.size(); ++f) {
        double total = 0.0;
        for (int64_t k = 0; k < attr.numel(); ++k) total += masks[f][k] * attr[k];
        scores[f] += std::abs(total);
      }
    }
  }
  for (double& s : scores) s /= static_cast<double>(m);
  return scores;
}

net::Network FrequencyClassifier(int64_t signal_length, int64_t hidden, uint64_t seed) {
  net::Architecture arch;
  arch.input_shape = {signal_length};
  arch.num_classes = 2;
  arch.layers = {{net::LayerKind::kLinear, hidden}, {net::LayerKind::kRelu},
                 {net::LayerKind::kLinear, hidden}, {net::LayerKind::kRelu},
                 {net::LayerKind::kLinear, 2}};
  return net::InitRandom(arch, seed);
}

FrequencyResult RunFrequencyRecovery(const FrequencyConfig& c) {
  if (c.methods.empty()) throw InvalidArgument("frequency recovery: no methods given");
  if (c.n_datasets < 1 || c.eval_samples < 1) {
    throw InvalidArgument("frequency recovery: need at least one dataset and one sample");
  }
  std::vector<trim::AttributionMethod> methods;
  for (const auto& name : c.methods) methods.push_back(trim::AttributionMethodFromName(name));
  FrequencyResult result;
  result.methods = c.methods;
  std::vector<int> errors(methods.size(), 0);
  Rng seeds = MakeRng(c.seed, 0xda7a);
  for (int d = 0; d < c.n_datasets; ++d) {
    FrequencyDatasetRow row;
    row.dataset = d;
    row.seed = seeds();
    const FrequencyTask task = SimulateFrequencyTask(c.n_samples, c.signal_length, row.seed);
    row.planted = task.planted;
    cdep::TrainConfig tc;
    tc.epochs = c.epochs;
    tc.learning_rate = c.learning_rate;
    tc.momentum = c.momentum;
    tc.batch_size = c.batch_size;
    tc.seed = row.seed;
    tc.pixels_per_batch = 0;
    net::Network trained;
    try {
      trained = cdep::Train(FrequencyClassifier(c.signal_length, c.hidden, row.seed + 1),
                            task.data, tc)
                    .net;
    } catch (const DivergenceError&) {
      row.skipped = true;
      ++result.skipped;
      result.rows.push_back(row);
      continue;
    }
    row.train_accuracy = net::Accuracy(trained, task.data);
    const int64_t m = std::min<int64_t>(c.eval_samples, c.n_samples);
    std::vector<int64_t> first(m);
    for (int64_t i = 0; i < m; ++i) first[i] = i;
    const Tensor eval = net::SelectRows(task.data.inputs, first);
    for (size_t k = 0; k < methods.size(); ++k) {
      const auto scores = FrequencyScores(trained, eval, methods[k], 1, c.ig_steps);
      const int best = static_cast<int>(std::max_element(scores.begin(), scores.end()) -
                                        scores.begin());
      row.recovered.push_back(best);
      row.scores.push_back(scores);
      errors[k] += best != task.planted;
    }
    result.rows.push_back(row);
  }
  const double runs = static_cast<double>(c.n_datasets - result.skipped);
  for (size_t k = 0; k < methods.size(); ++k) {
    const double p = runs > 0 ? errors[k] / runs : 0.0;
    result.error_pct.push_back(100.0 * p);
    result.stderr_pct.push_back(runs > 0 ? 100.0 * std::sqrt(p * (1 - p) / runs) : 0.0);
  }
  return result;
}

}  // namespace cdlab::bench
