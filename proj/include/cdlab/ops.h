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

#ifndef CDLAB_OPS_H_
#define CDLAB_OPS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "cdlab/tape.h"
#include "cdlab/tensor.h"

namespace cdlab {

// Differentiable primitives. Binary elementwise ops broadcast with numpy rules.
// Every op records onto the active tape when one of its inputs is tracked.

Var Add(const Var& a, const Var& b);
Var Subtract(const Var& a, const Var& b);
Var Multiply(const Var& a, const Var& b);
// Throws DomainError if any denominator entry is zero.
Var Divide(const Var& a, const Var& b);
Var Scale(const Var& a, double factor);
Var Negate(const Var& a);

Var Abs(const Var& a);
// Subgradient at 0 is 0.
Var Relu(const Var& a);
Var Sigmoid(const Var& a);
Var Tanh(const Var& a);
Var Exp(const Var& a);
// Throws DomainError on nonpositive entries.
Var Log(const Var& a);
// Elementwise a^exponent. Negative bases need an integral exponent.
Var Power(const Var& a, double exponent);

Var Sum(const Var& a);
Var Mean(const Var& a);
// Sums over `axis`, removing it.
Var SumAxis(const Var& a, int axis);
Var L1Norm(const Var& a);
Var L2NormSquared(const Var& a);

// a: [m, k]; b: [k, n], or [n, k] when transpose_b.
Var MatMul(const Var& a, const Var& b, bool transpose_b = false);

// x: [B, C, H, W]; w: [O, C, KH, KW]; valid padding.
Var Conv2d(const Var& x, const Var& w, int64_t stride);
// x: [B, C, H, W]. Max over each window.
Var MaxPool2d(const Var& x, int64_t window, int64_t stride);
// Picks x at the argmax of `route` within each window (first maximum wins).
Var MaxPool2dRouted(const Var& x, const Tensor& route, int64_t window,
                    int64_t stride);

Var Reshape(const Var& a, Shape shape);
Var Concatenate(std::span<const Var> parts, int axis);
Var Narrow(const Var& a, int axis, int64_t start, int64_t length);

// Softmax and log-softmax over the last axis, max-subtracted.
Var Softmax(const Var& a);
Var LogSoftmax(const Var& a);

// Discrete Fourier transform along `axis` of a complex tensor held as paired
// reals in a trailing axis of size 2 (re, im). The inverse is normalized 1/n.
Var Dft(const Var& z, int axis);
Var InverseDft(const Var& z, int axis);

// Elementwise select: cond != 0 ? a : b. `cond` broadcasts to a's shape.
Var Where(const Tensor& cond, const Var& a, const Var& b);

// Share of a bias assigned to the `beta` side when splitting it by
// |beta_pre| / (|beta_pre| + |gamma_pre|). Rows are the leading axis: a row
// whose beta side is exactly zero gives share 0 everywhere, otherwise a row
// whose gamma side is exactly zero gives 1, and units with both sides zero
// inside a mixed row split evenly.
Var BiasShare(const Var& beta_pre, const Var& gamma_pre);

// Static attributes for PrimitiveForward.
struct OpAttrs {
  int64_t stride = 1;
  int64_t window = 2;
  int axis = -1;
  int64_t start = 0;
  int64_t length = 0;
  double scalar = 1.0;
  bool transpose_b = false;
  Shape shape;
};

// Evaluates one primitive on tensors without recording.
Tensor PrimitiveForward(OpKind kind, std::span<const Tensor> inputs,
                        const OpAttrs& attrs = {});

}  // namespace cdlab

#endif  // CDLAB_OPS_H_
