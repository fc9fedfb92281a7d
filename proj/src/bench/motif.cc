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

#include "cdlab/bench/motif.h"

#include "cdlab/awd/dwt.h"
#include "cdlab/awd/linear_model.h"
#include "cdlab/errors.h"
#include "cdlab/fft.h"
#include "cdlab/net/model_io.h"
#include "cdlab/random.h"

namespace cdlab::bench {

net::Dataset MakeMotifTask(int64_t n_samples, int64_t length, uint64_t seed) {
  if (length < 64 || !IsPowerOfTwo(length)) {
    throw InvalidArgument("motif task: length must be a power of two >= 64");
  }
  if (n_samples < 1) throw InvalidArgument("motif task: need at least one sample");
  Rng rng = MakeRng(seed, 0x3071f);
  std::normal_distribution<double> noise(0.0, 0.25);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  net::Dataset d;
  std::vector<double> x(n_samples * length);
  for (int64_t i = 0; i < n_samples; ++i) {
    double* row = x.data() + i * length;
    for (int64_t t = 0; t < length; ++t) row[t] = noise(rng);
    const bool present = unit(rng) < 0.5;
    double amplitude = 0.0;
    if (present) {
      amplitude = 0.5 + 1.5 * unit(rng);
      const int64_t rise = std::uniform_int_distribution<int64_t>(16, 40)(rng);
      const int64_t start = std::uniform_int_distribution<int64_t>(0, length - rise - 1)(rng);
      for (int64_t k = 0; k < rise; ++k) {
        row[start + k] += amplitude * static_cast<double>(k + 1) / static_cast<double>(rise);
      }
    }
    d.labels.push_back(present ? 1 : 0);
    d.targets.push_back(amplitude);
  }
  d.inputs = Tensor({n_samples, length}, std::move(x));
  return d;
}

MotifConfig DefaultMotifConfig() {
  MotifConfig c;
  c.teacher.loss = cdep::PredictionLoss::kSquaredError;
  c.teacher.learning_rate = 0.01;
  c.teacher.momentum = 0.9;
  c.teacher.epochs = 60;
  c.teacher.batch_size = 32;
  c.teacher.pixels_per_batch = 0;
  c.awd.levels = 4;
  c.awd.iterations = 300;
  return c;
}

net::Network MotifTeacher(int64_t length, int64_t hidden, uint64_t seed) {
  net::Architecture arch;
  arch.input_shape = {length};
  arch.num_classes = 1;
  arch.layers = {{net::LayerKind::kLinear, hidden}, {net::LayerKind::kRelu},
                 {net::LayerKind::kLinear, 1}};
  return net::InitRandom(arch, seed);
}

namespace {

Tensor FeatureMatrix(const Tensor& h, const Tensor& signals, int levels, int per_scale) {
  const int64_t n = signals.shape()[0], len = signals.shape()[1];
  std::vector<double> rows;
  for (int64_t i = 0; i < n; ++i) {
    const Tensor c = awd::Dwt(h, net::BatchRow(signals, i).Reshaped({len}), levels);
    const auto f = awd::MaxCoefficientFeatures(c, levels, per_scale);
    rows.insert(rows.end(), f.begin(), f.end());
  }
  const int64_t p = static_cast<int64_t>(rows.size()) / n;
  return Tensor({n, p}, std::move(rows));
}

}  // namespace

FilterScore ScoreFilter(const net::Network& teacher, const Tensor& h, const net::Dataset& train,
                        const net::Dataset& test, const MotifConfig& c) {
  const int levels = c.awd.levels;
  FilterScore s;
  NoRecordingScope no_tape;
  const Var coeffs = awd::DwtForward(Var(h), Var(test.inputs), levels);
  const Var attrs = awd::CoefficientAttributions(teacher, net::ConstantParams(teacher), Var(h),
                                                 Var(test.inputs), levels, 0);
  s.compression = awd::CompressionFactor(coeffs.value(), attrs.value());
  const Tensor train_features = FeatureMatrix(h, train.inputs, levels, c.per_scale);
  const Tensor test_features = FeatureMatrix(h, test.inputs, levels, c.per_scale);
  const auto model = awd::FitRidgeCv(train_features, train.targets, c.alphas);
  s.r2 = awd::RSquared(test.targets, model.Predict(test_features));
  return s;
}

MotifResult RunMotif(const MotifConfig& c) {
  if (c.seeds < 1) throw InvalidArgument("motif: need at least one seed");
  if (c.distill_signals < 1 || c.distill_signals > c.n_train) {
    throw InvalidArgument("motif: distill_signals must be in [1, n_train]");
  }
  MotifResult result;
  Rng seeds = MakeRng(c.seed, 0xa3d1);
  for (int s = 0; s < c.seeds; ++s) {
    MotifRow row;
    row.seed = seeds();
    const net::Dataset train = MakeMotifTask(c.n_train, c.length, row.seed);
    const net::Dataset test = MakeMotifTask(c.n_test, c.length, row.seed ^ 0x7e57);
    cdep::TrainConfig tc = c.teacher;
    tc.seed = row.seed;
    tc.lambda = 0.0;
    const net::Network teacher =
        cdep::Train(MotifTeacher(c.length, c.hidden, row.seed + 1), train, tc).net;
    const Tensor pred = net::Logits(teacher, test.inputs);
    row.teacher_r2 = awd::RSquared(test.targets, pred.data());

    awd::AwdConfig ac = c.awd;
    ac.seed = row.seed;
    ac.class_index = 0;
    std::vector<int64_t> first(c.distill_signals);
    for (int64_t i = 0; i < c.distill_signals; ++i) first[i] = i;
    const Tensor x = net::SelectRows(train.inputs, first);
    const Tensor init = ac.init.defined() ? ac.init : awd::Daubechies5Filter();
    const auto distilled = awd::Distill(teacher, x, ac);
    row.filter = distilled.filter;
    row.constraint_residual = distilled.constraints.max_residual;
    row.initial = ScoreFilter(teacher, init, train, test, c);
    row.learned = ScoreFilter(teacher, distilled.filter, train, test, c);
    result.compression_wins += row.learned.compression < row.initial.compression;
    result.r2_wins += row.learned.r2 >= row.initial.r2;
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace cdlab::bench
