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

#include "cdlab/net/dataset.h"

#include "cdlab/errors.h"
#include "cdlab/net/network.h"

namespace cdlab::net {

Tensor SelectRows(const Tensor& batch, std::span<const int64_t> indices) {
  const int64_t n = batch.shape()[0];
  const int64_t width = n == 0 ? 0 : batch.numel() / n;
  std::vector<double> out;
  out.reserve(indices.size() * width);
  const auto d = batch.data();
  for (int64_t i : indices) {
    if (i < 0 || i >= n) throw InvalidArgument("row " + std::to_string(i) + " out of range");
    out.insert(out.end(), d.begin() + i * width, d.begin() + (i + 1) * width);
  }
  Shape shape = batch.shape();
  shape[0] = static_cast<int64_t>(indices.size());
  return Tensor(std::move(shape), std::move(out));
}

Dataset Subset(const Dataset& data, std::span<const int64_t> indices) {
  Dataset out;
  out.inputs = SelectRows(data.inputs, indices);
  for (int64_t i : indices) {
    if (!data.labels.empty()) out.labels.push_back(data.labels[i]);
    if (!data.targets.empty()) out.targets.push_back(data.targets[i]);
  }
  return out;
}

double Accuracy(const Network& net, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  if (static_cast<int64_t>(data.labels.size()) != data.size()) {
    throw ShapeError("accuracy: dataset has no labels for every row");
  }
  const auto pred = Predict(net, data.inputs);
  int64_t hit = 0;
  for (int64_t i = 0; i < data.size(); ++i) hit += pred[i] == data.labels[i];
  return static_cast<double>(hit) / static_cast<double>(data.size());
}

nlohmann::json TensorToJson(const Tensor& t) {
  return {{"shape", t.shape()}, {"data", t.ToVector()}};
}

Tensor TensorFromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data")) {
    throw ModelFormatError("tensor JSON needs 'shape' and 'data'");
  }
  Shape shape;
  std::vector<double> data;
  try {
    shape = j.at("shape").get<Shape>();
    data = j.at("data").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("tensor JSON: ") + e.what());
  }
  for (int64_t d : shape) {
    if (d < 0) throw ModelFormatError("tensor JSON: negative dimension");
  }
  if (NumElements(shape) != static_cast<int64_t>(data.size())) {
    throw ModelFormatError("tensor JSON: " + std::to_string(data.size()) +
                           " values for shape " + ShapeToString(shape));
  }
  return Tensor(std::move(shape), std::move(data));
}

nlohmann::json DatasetToJson(const Dataset& data) {
  return {{"format", "cdlab-dataset"}, {"version", 1}, {"inputs", TensorToJson(data.inputs)},
          {"labels", data.labels},     {"targets", data.targets}};
}

Dataset DatasetFromJson(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", std::string()) != "cdlab-dataset") {
    throw ModelFormatError("not a cdlab-dataset document");
  }
  if (j.value("version", 0) != 1) {
    throw VersionMismatchError("dataset version " + j.value("version", nlohmann::json()).dump() +
                               " is not supported (expected 1)");
  }
  Dataset d;
  d.inputs = TensorFromJson(j.at("inputs"));
  if (d.inputs.rank() < 1) throw ShapeInconsistencyError("dataset inputs need a leading axis");
  try {
    d.labels = j.value("labels", std::vector<int>());
    d.targets = j.value("targets", std::vector<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("dataset JSON: ") + e.what());
  }
  const auto n = static_cast<size_t>(d.size());
  if ((!d.labels.empty() && d.labels.size() != n) || (!d.targets.empty() && d.targets.size() != n)) {
    throw ShapeInconsistencyError("dataset: labels and targets need one entry per row");
  }
  return d;
}

}  // namespace cdlab::net
