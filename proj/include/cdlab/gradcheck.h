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

#ifndef CDLAB_GRADCHECK_H_
#define CDLAB_GRADCHECK_H_

#include <cstdint>
#include <vector>

#include "cdlab/tape.h"

namespace cdlab {

struct GradCheckReport {
  bool passed = true;
  double max_relative_error = 0.0;
  int64_t checked = 0;
  // Entries whose perturbation changed a discrete branch (kink side, pooling
  // route). They are skipped rather than compared.
  std::vector<int64_t> excluded;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error, so near-zero gradients are
  // compared in absolute terms.
  double floor = 1e-3;
};

// Compares the reverse-mode gradient of `output` with respect to the leaf
// `parameter` against central differences, entry by entry. The tape is
// replayed for each perturbation and restored afterwards. Never throws on a
// mismatch; the report carries the verdict.
GradCheckReport FiniteDifferenceCheck(Tape& tape, const Var& output,
                                      int parameter,
                                      const GradCheckOptions& options = {});

}  // namespace cdlab

#endif  // CDLAB_GRADCHECK_H_
