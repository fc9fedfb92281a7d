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

#ifndef CDLAB_AWD_DWT_H_
#define CDLAB_AWD_DWT_H_

#include <cstdint>
#include <vector>

#include "cdlab/tape.h"
#include "cdlab/tensor.h"

namespace cdlab::awd {

// Highpass filter g[n] = (-1)^n h[N-1-n].
Var HighpassFromLowpass(const Var& h);

// One periodic analysis step on x [B, L] (L even):
//   a[k] = sum_n h[n] x[(2k+n) mod L],  d[k] = sum_n g[n] x[(2k+n) mod L]
// Returns [B, L] holding a then d. Differentiable in both h and x.
Var AnalysisStep(const Var& h, const Var& x);
// Adjoint of AnalysisStep: x[(2k+n) mod L] += h[n] a[k] + g[n] d[k].
Var SynthesisStep(const Var& h, const Var& c);

// Multi-level transform of x [B, L], L divisible by 2^levels. The flat
// coefficient layout is [approx_J, detail_J, detail_{J-1}, ..., detail_1].
Var DwtForward(const Var& h, const Var& x, int levels);
Var DwtInverse(const Var& h, const Var& coeffs, int levels);

// Tensor conveniences for a single signal [L].
Tensor Dwt(const Tensor& h, const Tensor& x, int levels);
Tensor Idwt(const Tensor& h, const Tensor& coeffs, int levels);

// (offset, length) of each scale in the flat layout: approx_J first, then
// detail_J down to detail_1.
std::vector<std::pair<int64_t, int64_t>> ScaleBounds(int64_t length, int levels);
std::vector<std::vector<double>> SplitScales(const Tensor& coeffs, int levels);

// Throws InvalidArgument unless length is divisible by 2^levels, levels >= 1
// and the filter has even length.
void CheckDwtShape(int64_t filter_length, int64_t length, int levels);

Tensor HaarFilter();
Tensor Daubechies2Filter();  // 4 taps
Tensor Daubechies5Filter();  // 10 taps

}  // namespace cdlab::awd

#endif  // CDLAB_AWD_DWT_H_
