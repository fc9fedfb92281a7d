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

#ifndef CDLAB_TENSOR_H_
#define CDLAB_TENSOR_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cdlab {

using Shape = std::vector<int64_t>;

int64_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Per-thread allocation counters for tensor storage. Used by tests that bound
// the cost of attribution passes relative to a plain forward pass.
struct AllocStats {
  int64_t tensors = 0;
  int64_t doubles = 0;
};
AllocStats& ThreadAllocStats();

// Dense row-major array of doubles. Storage is shared and immutable, so copies
// are cheap and a Tensor can be read from several threads at once.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Zeros(Shape shape);
  static Tensor Full(Shape shape, double value);
  static Tensor Scalar(double value);
  static Tensor Vector(std::vector<double> values);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int axis) const;
  int64_t numel() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

  std::span<const double> data() const {
    return data_ ? std::span<const double>(*data_) : std::span<const double>();
  }
  double operator[](int64_t i) const { return (*data_)[i]; }
  // Value of a single-element tensor.
  double item() const;
  std::vector<double> ToVector() const { return {data().begin(), data().end()}; }

  // Same storage viewed with a different shape of equal element count.
  Tensor Reshaped(Shape shape) const;

  bool AllFinite() const;
  bool AllZero() const;

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
};

// Exact elementwise equality of shape and bits.
bool BitEqual(const Tensor& a, const Tensor& b);
double MaxAbsDiff(const Tensor& a, const Tensor& b);

}  // namespace cdlab

#endif  // CDLAB_TENSOR_H_
