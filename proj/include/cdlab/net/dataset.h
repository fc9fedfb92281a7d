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

#ifndef CDLAB_NET_DATASET_H_
#define CDLAB_NET_DATASET_H_

#include <cstdint>
#include <span>
#include <vector>

#include "cdlab/tensor.h"
#include "json.hpp"

namespace cdlab::net {

struct Network;

// Inputs [n, ...] with either class labels or real targets (or both).
struct Dataset {
  Tensor inputs;
  std::vector<int> labels;
  std::vector<double> targets;

  int64_t size() const { return inputs.defined() ? inputs.shape()[0] : 0; }
  Shape sample_shape() const { return Shape(inputs.shape().begin() + 1, inputs.shape().end()); }
};

// Rows `indices` of `data`, in that order.
Dataset Subset(const Dataset& data, std::span<const int64_t> indices);
Tensor SelectRows(const Tensor& batch, std::span<const int64_t> indices);

// Fraction of rows whose argmax logit equals the label.
double Accuracy(const Network& net, const Dataset& data);

// {"shape": [...], "data": [...]} with row-major values.
nlohmann::json TensorToJson(const Tensor& t);
// Throws ModelFormatError when fields are missing or the value count does
// not match the shape.
Tensor TensorFromJson(const nlohmann::json& j);

// {"format": "cdlab-dataset", "version": 1, "inputs": tensor, "labels": [...],
// "targets": [...]}. Throws ModelFormatError, VersionMismatchError, or
// ShapeInconsistencyError when labels or targets do not have one entry per row.
nlohmann::json DatasetToJson(const Dataset& data);
Dataset DatasetFromJson(const nlohmann::json& j);

}  // namespace cdlab::net

#endif  // CDLAB_NET_DATASET_H_
