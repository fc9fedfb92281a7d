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

#include "cdlab/awd/linear_model.h"

#include <cmath>
#include <limits>
#include <Eigen/Dense>

#include "cdlab/errors.h"

namespace cdlab::awd {

namespace {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void CheckShapes(const Tensor& features, std::span<const double> targets) {
  if (features.shape().size() != 2) {
    throw ShapeError("ridge: features must be [n, p], got " + ShapeToString(features.shape()));
  }
  if (features.shape()[0] != static_cast<int64_t>(targets.size())) {
    throw ShapeError("ridge: " + std::to_string(features.shape()[0]) + " rows but " +
                     std::to_string(targets.size()) + " targets");
  }
}

Tensor SelectRows(const Tensor& x, const std::vector<int64_t>& rows) {
  const int64_t p = x.shape()[1];
  std::vector<double> out;
  out.reserve(rows.size() * p);
  for (int64_t r : rows) {
    for (int64_t j = 0; j < p; ++j) out.push_back(x[r * p + j]);
  }
  return Tensor({static_cast<int64_t>(rows.size()), p}, std::move(out));
}

}  // namespace

std::vector<double> RidgeModel::Predict(const Tensor& features) const {
  const int64_t n = features.shape()[0], p = features.shape()[1];
  if (p != static_cast<int64_t>(weights.size())) {
    throw ShapeError("ridge: model expects " + std::to_string(weights.size()) + " features, got " +
                     std::to_string(p));
  }
  std::vector<double> out(n, intercept);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < p; ++j) {
      out[i] += weights[j] * (features[i * p + j] - mean[j]) / scale[j];
    }
  }
  return out;
}

RidgeModel FitRidge(const Tensor& features, std::span<const double> targets, double alpha) {
  CheckShapes(features, targets);
  if (alpha < 0.0) throw InvalidArgument("ridge: alpha must be nonnegative");
  const int64_t n = features.shape()[0], p = features.shape()[1];
  if (n < 2) throw InvalidArgument("ridge: need at least two rows");
  RidgeModel model;
  model.alpha = alpha;
  model.mean.assign(p, 0.0);
  model.scale.assign(p, 1.0);
  Matrix x = Eigen::Map<const RowMatrix>(features.data().data(), n, p);
  for (int64_t j = 0; j < p; ++j) {
    const double mu = x.col(j).mean();
    const double sd = std::sqrt((x.col(j).array() - mu).square().mean());
    model.mean[j] = mu;
    model.scale[j] = sd > 0.0 ? sd : 1.0;
    x.col(j) = (x.col(j).array() - mu) / model.scale[j];
  }
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(targets.data(), n);
  model.intercept = y.mean();
  y.array() -= model.intercept;
  Matrix gram = x.transpose() * x;
  gram.diagonal().array() += alpha;
  const Eigen::VectorXd w = gram.ldlt().solve(x.transpose() * y);
  model.weights.assign(w.data(), w.data() + p);
  return model;
}

RidgeModel FitRidgeCv(const Tensor& features, std::span<const double> targets,
                      std::span<const double> alphas, int folds) {
  CheckShapes(features, targets);
  if (alphas.empty()) throw InvalidArgument("ridge: no candidate alphas");
  const int64_t n = features.shape()[0];
  if (folds < 2 || folds > n) throw InvalidArgument("ridge: invalid fold count");
  double best_err = std::numeric_limits<double>::infinity();
  double best_alpha = alphas[0];
  for (double alpha : alphas) {
    double err = 0.0;
    for (int f = 0; f < folds; ++f) {
      const int64_t lo = n * f / folds, hi = n * (f + 1) / folds;
      std::vector<int64_t> train, test;
      std::vector<double> ytrain;
      for (int64_t i = 0; i < n; ++i) {
        if (i >= lo && i < hi) {
          test.push_back(i);
        } else {
          train.push_back(i);
          ytrain.push_back(targets[i]);
        }
      }
      const RidgeModel m = FitRidge(SelectRows(features, train), ytrain, alpha);
      const auto pred = m.Predict(SelectRows(features, test));
      for (size_t k = 0; k < test.size(); ++k) {
        const double d = pred[k] - targets[test[k]];
        err += d * d;
      }
    }
    if (err < best_err) {
      best_err = err;
      best_alpha = alpha;
    }
  }
  return FitRidge(features, targets, best_alpha);
}

double RSquared(std::span<const double> targets, std::span<const double> predictions) {
  if (targets.size() != predictions.size()) {
    throw ShapeError("r2: target and prediction counts differ");
  }
  if (targets.empty()) return 0.0;
  double mean = 0.0;
  for (double t : targets) mean += t;
  mean /= static_cast<double>(targets.size());
  double res = 0.0, tot = 0.0;
  for (size_t i = 0; i < targets.size(); ++i) {
    res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
    tot += (targets[i] - mean) * (targets[i] - mean);
  }
  if (tot == 0.0) return 0.0;
  return 1.0 - res / tot;
}

}  // namespace cdlab::awd
