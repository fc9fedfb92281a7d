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

#include "cdlab/tensor.h"

#include <cmath>
#include <cstring>
#include <sstream>

#include "cdlab/errors.h"

namespace cdlab {

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

AllocStats& ThreadAllocStats() {
  thread_local AllocStats stats;
  return stats;
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
  for (int64_t d : shape_) {
    if (d < 0) throw ShapeError("negative dimension in " + ShapeToString(shape_));
  }
  if (NumElements(shape_) != static_cast<int64_t>(data.size())) {
    throw ShapeError("shape " + ShapeToString(shape_) + " does not match " +
                     std::to_string(data.size()) + " elements");
  }
  auto& stats = ThreadAllocStats();
  stats.tensors += 1;
  stats.doubles += static_cast<int64_t>(data.size());
  data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor Tensor::Zeros(Shape shape) {
  const int64_t n = NumElements(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::Full(Shape shape, double value) {
  const int64_t n = NumElements(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::Scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::Vector(std::vector<double> values) {
  const int64_t n = static_cast<int64_t>(values.size());
  return Tensor({n}, std::move(values));
}

int64_t Tensor::dim(int axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     ShapeToString(shape_));
  }
  return shape_[axis];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + ShapeToString(shape_));
  }
  return (*data_)[0];
}

Tensor Tensor::Reshaped(Shape shape) const {
  if (NumElements(shape) != numel()) {
    throw ShapeError("cannot reshape " + ShapeToString(shape_) + " to " +
                     ShapeToString(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

bool Tensor::AllFinite() const {
  for (double v : data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::AllZero() const {
  for (double v : data()) {
    if (v != 0.0) return false;
  }
  return true;
}

bool BitEqual(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  auto da = a.data();
  auto db = b.data();
  return da.empty() || std::memcmp(da.data(), db.data(), da.size() * sizeof(double)) == 0;
}

double MaxAbsDiff(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) {
    throw ShapeError("MaxAbsDiff of " + ShapeToString(a.shape()) + " and " +
                     ShapeToString(b.shape()));
  }
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace cdlab
