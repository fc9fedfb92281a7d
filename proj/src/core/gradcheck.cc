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

#include "cdlab/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "cdlab/errors.h"

namespace cdlab {

GradCheckReport FiniteDifferenceCheck(Tape& tape, const Var& output,
                                      int parameter,
                                      const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw InvalidArgument("gradient check step must be positive");
  GradCheckReport report;
  const Gradients grads = tape.Backward(output);
  const Tensor analytic = grads.at(parameter);
  const Tensor base = tape.node(parameter).value;
  const int out = output.node();
  const auto base_signature = tape.BranchSignature(out);

  auto evaluate = [&](int64_t index, double delta, bool& same_branch) {
    std::vector<double> v = base.ToVector();
    v[index] += delta;
    tape.SetLeafValue(parameter, Tensor(base.shape(), std::move(v)));
    tape.Replay();
    same_branch = same_branch && tape.BranchSignature(out) == base_signature;
    return tape.node(out).value.item();
  };

  for (int64_t i = 0; i < base.numel(); ++i) {
    bool same = true;
    const double plus = evaluate(i, options.step, same);
    const double minus = evaluate(i, -options.step, same);
    if (!same) {
      report.excluded.push_back(i);
      continue;
    }
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
    const double rel = std::abs(a - numeric) / denom;
    report.max_relative_error = std::max(report.max_relative_error, rel);
    ++report.checked;
  }
  tape.SetLeafValue(parameter, base);
  tape.Replay();
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

}  // namespace cdlab
