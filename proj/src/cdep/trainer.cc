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

#include "cdlab/cdep/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdlab/errors.h"
#include "cdlab/ops.h"

namespace cdlab::cdep {

namespace {

constexpr uint64_t kShuffleStream = 1;
constexpr uint64_t kPixelStream = 2;

Tensor OneHot(std::span<const int> classes, int64_t num_classes) {
  std::vector<double> m(classes.size() * num_classes, 0.0);
  for (size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] < 0 || classes[i] >= num_classes) {
      throw InvalidArgument("label " + std::to_string(classes[i]) + " out of range");
    }
    m[i * num_classes + classes[i]] = 1.0;
  }
  return Tensor({static_cast<int64_t>(classes.size()), num_classes}, std::move(m));
}

const char* LossName(PredictionLoss kind) {
  return kind == PredictionLoss::kCrossEntropy ? "cross-entropy" : "squared-error";
}

const char* ScopeName(ExplanationScope scope) {
  return scope == ExplanationScope::kTrueClass ? "true-class" : "all-classes";
}

}  // namespace

LossTerms CdepLoss(const net::Network& net, const net::ParamVars& params, const Tensor& batch,
                   std::span<const int> labels, std::span<const double> targets,
                   std::span<const ExplanationTarget> explanations, double lambda,
                   PredictionLoss kind, ExplanationScope scope) {
  if (batch.rank() < 1) throw ShapeError("cdep: batch must have a leading axis");
  const int64_t b = batch.shape()[0];
  const Shape sample(batch.shape().begin() + 1, batch.shape().end());
  if (sample != net.input_shape) {
    throw ShapeError("cdep: batch " + ShapeToString(batch.shape()) + " does not match input " +
                     ShapeToString(net.input_shape));
  }
  const bool regression = kind == PredictionLoss::kSquaredError;
  if (regression ? static_cast<int64_t>(targets.size()) != b
                 : static_cast<int64_t>(labels.size()) != b) {
    throw ShapeError("cdep: need one label or target per row");
  }

  LossTerms out;
  const Var logits = net::Forward(net, params, batch).back();
  if (regression) {
    const Var pred = Reshape(Narrow(logits, 1, 0, 1), {b});
    const Var t(Tensor({b}, std::vector<double>(targets.begin(), targets.end())));
    out.prediction = L2NormSquared(Subtract(pred, t));
  } else {
    out.prediction = Negate(Sum(Multiply(LogSoftmax(logits), OneHot(labels, net.num_classes))));
  }

  // Expand targets to (row, group, value) triples.
  std::vector<int64_t> rows;
  std::vector<Tensor> masks;
  std::vector<double> values;
  std::vector<int> classes;
  for (const ExplanationTarget& e : explanations) {
    if (e.group.shape() != net.input_shape) {
      throw ShapeError("cdep: group " + ShapeToString(e.group.shape()) +
                       " does not match input " + ShapeToString(net.input_shape));
    }
    if (e.sample >= b) throw InvalidArgument("cdep: explanation sample out of range");
    const int64_t lo = e.sample < 0 ? 0 : e.sample;
    const int64_t hi = e.sample < 0 ? b : e.sample + 1;
    for (int64_t i = lo; i < hi; ++i) {
      rows.push_back(i);
      masks.push_back(e.group);
      values.push_back(e.value);
      classes.push_back(regression ? 0 : labels[i]);
    }
  }
  if (lambda == 0.0 || rows.empty()) {
    out.explanation = Var(Tensor::Scalar(0.0));
    out.total = out.prediction;
    return out;
  }
  const Tensor x = net::SelectRows(batch, rows);
  const auto pairs = cd::CdForward(net, params, x, net::Stack(masks));
  const int64_t g = static_cast<int64_t>(rows.size());
  if (scope == ExplanationScope::kAllClasses) {
    const Tensor v = Tensor({g, 1}, std::move(values));
    out.explanation = L1Norm(Subtract(pairs.back().beta, v));
  } else {
    const Var beta = SumAxis(Multiply(pairs.back().beta, OneHot(classes, net.num_classes)), 1);
    out.explanation = L1Norm(Subtract(beta, Tensor({g}, std::move(values))));
  }
  out.total = Add(out.prediction, Scale(out.explanation, lambda));
  return out;
}

void ValidateConfig(const TrainConfig& c) {
  if (c.lambda < 0.0) throw InvalidArgument("cdep: lambda must be nonnegative");
  if (!(c.learning_rate > 0.0)) throw InvalidArgument("cdep: learning_rate must be positive");
  if (c.momentum < 0.0 || c.momentum >= 1.0) throw InvalidArgument("cdep: momentum in [0, 1)");
  if (c.epochs < 0) throw InvalidArgument("cdep: epochs must be nonnegative");
  if (c.batch_size < 1) throw InvalidArgument("cdep: batch_size must be positive");
  if (c.pixels_per_batch < 0) throw InvalidArgument("cdep: pixels_per_batch must be nonnegative");
  for (const auto& e : c.explanations) {
    if (e.sample != -1) throw InvalidArgument("cdep: fixed explanations apply to every row");
  }
}

TrainConfig TrainConfigFromJson(const nlohmann::json& j) {
  TrainConfig c;
  c.lambda = j.value("lambda", c.lambda);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.pixels_per_batch = j.value("pixels_per_batch", c.pixels_per_batch);
  const std::string loss = j.value("loss", std::string(LossName(c.loss)));
  if (loss == "cross-entropy") {
    c.loss = PredictionLoss::kCrossEntropy;
  } else if (loss == "squared-error") {
    c.loss = PredictionLoss::kSquaredError;
  } else {
    throw InvalidArgument("cdep: unknown loss '" + loss + "'");
  }
  const std::string scope = j.value("scope", std::string(ScopeName(c.scope)));
  if (scope == "true-class") {
    c.scope = ExplanationScope::kTrueClass;
  } else if (scope == "all-classes") {
    c.scope = ExplanationScope::kAllClasses;
  } else {
    throw InvalidArgument("cdep: unknown explanation scope '" + scope + "'");
  }
  ValidateConfig(c);
  return c;
}

nlohmann::json TrainConfigToJson(const TrainConfig& c) {
  return {{"lambda", c.lambda},         {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},     {"epochs", c.epochs},
          {"batch_size", c.batch_size}, {"seed", c.seed},
          {"pixels_per_batch", c.pixels_per_batch}, {"loss", LossName(c.loss)},
          {"scope", ScopeName(c.scope)},
          {"explanations", c.explanations.size()}};
}

std::vector<cd::FeatureGroup> SamplePixelGroups(const Shape& image_shape, int count, Rng& rng) {
  if (image_shape.size() != 3) {
    throw ShapeError("pixel groups need an image shape [C, H, W], got " +
                     ShapeToString(image_shape));
  }
  const int64_t c = image_shape[0], hw = image_shape[1] * image_shape[2];
  if (count < 0 || count > hw) {
    throw InvalidArgument("cannot sample " + std::to_string(count) + " pixels from " +
                          std::to_string(hw));
  }
  std::vector<int64_t> all(hw);
  std::iota(all.begin(), all.end(), 0);
  // Partial Fisher-Yates: the first `count` entries become the sample.
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int64_t> pick(i, hw - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  std::vector<cd::FeatureGroup> groups;
  for (int i = 0; i < count; ++i) {
    std::vector<double> m(c * hw, 0.0);
    for (int64_t ch = 0; ch < c; ++ch) m[ch * hw + all[i]] = 1.0;
    groups.emplace_back(image_shape, std::move(m));
  }
  return groups;
}

std::vector<cd::FeatureGroup> SamplePixelGroups(const Shape& image_shape, int count,
                                                uint64_t seed) {
  Rng rng = MakeRng(seed, kPixelStream);
  return SamplePixelGroups(image_shape, count, rng);
}

TrainResult Train(const net::Network& init, const net::Dataset& data, const TrainConfig& config) {
  ValidateConfig(config);
  const int64_t n = data.size();
  if (n == 0) throw InvalidArgument("cdep: empty dataset");
  if (data.sample_shape() != init.input_shape) {
    throw ShapeError("cdep: dataset rows " + ShapeToString(data.sample_shape()) +
                     " do not match input " + ShapeToString(init.input_shape));
  }
  const bool pixels = config.lambda > 0.0 && config.pixels_per_batch > 0;
  if (pixels && init.input_shape.size() != 3) {
    throw InvalidArgument("cdep: pixel sampling needs image inputs; set pixels_per_batch = 0");
  }

  Rng shuffle_rng = MakeRng(config.seed, kShuffleStream);
  Rng pixel_rng = MakeRng(config.seed, kPixelStream);
  std::vector<std::vector<Tensor>> params;
  for (const auto& layer : init.layers) params.push_back(layer.params);
  std::vector<std::vector<std::vector<double>>> velocity;
  for (const auto& layer : params) {
    velocity.emplace_back();
    for (const Tensor& p : layer) velocity.back().emplace_back(p.numel(), 0.0);
  }
  TrainResult result;
  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double pred_sum = 0.0, expl_sum = 0.0;
    for (int64_t start = 0; start < n; start += config.batch_size) {
      const int64_t stop = std::min<int64_t>(n, start + config.batch_size);
      const std::span<const int64_t> idx(order.data() + start, stop - start);
      const net::Dataset batch = net::Subset(data, idx);
      std::vector<ExplanationTarget> expl = config.explanations;
      if (pixels) {
        for (auto& g : SamplePixelGroups(init.input_shape, config.pixels_per_batch, pixel_rng)) {
          expl.push_back({-1, std::move(g), 0.0});
        }
      }
      const net::Network current = net::WithParams(init, params);
      Tape tape;
      RecordingScope rec(tape);
      const net::ParamVars vars = net::TrackParams(current, tape);
      const LossTerms loss =
          CdepLoss(current, vars, batch.inputs, batch.labels, batch.targets, expl, config.lambda,
                   config.loss, config.scope);
      const double total = loss.total.value().item();
      if (!std::isfinite(total)) {
        throw DivergenceError("cdep: loss is not finite in epoch " + std::to_string(epoch), epoch);
      }
      pred_sum += loss.prediction.value().item();
      expl_sum += loss.explanation.value().item();
      const Gradients grads = tape.Backward(loss.total);
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      for (size_t l = 0; l < params.size(); ++l) {
        for (size_t k = 0; k < params[l].size(); ++k) {
          const Tensor& g = grads[vars[l][k]];
          auto& v = velocity[l][k];
          std::vector<double> p = params[l][k].ToVector();
          for (size_t i = 0; i < p.size(); ++i) {
            v[i] = config.momentum * v[i] + g[i] * inv_b;
            p[i] -= config.learning_rate * v[i];
          }
          params[l][k] = Tensor(params[l][k].shape(), std::move(p));
        }
      }
    }
    for (const auto& layer : params) {
      for (const Tensor& p : layer) {
        for (double v : p.data()) {
          if (!std::isfinite(v)) {
            throw DivergenceError("cdep: weights are not finite after epoch " +
                                      std::to_string(epoch),
                                  epoch);
          }
        }
      }
    }
    result.history.push_back({pred_sum / n, expl_sum / n});
  }
  result.net = net::WithParams(init, params);
  return result;
}

}  // namespace cdlab::cdep
