/*
 * Copyright 2026 The Fedsplit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDSPLIT_SPLITTING_H_
#define FEDSPLIT_SPLITTING_H_

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsplit/problem.h"
#include "fedsplit/rng.h"

namespace fedsplit {

struct UniformSplit {
  double eps_split = 0.0;
  // Forces the interval midpoint instead of a random draw.
  bool midpoint = false;
};

struct LaplaceSplit {
  double scale = 1.0;
};

struct SplitRule {
  std::variant<UniformSplit, LaplaceSplit> variant;
  int m = 1;
};

struct SplitState {
  ModelVec visible;
  std::vector<ModelVec> invisible;
  ModelVec origin;

  int m() const { return static_cast<int>(invisible.size()); }
  ModelVec Total() const;
};

absl::Status ValidateSplitRule(const SplitRule& rule);

// Draws the visible part per rule, the non-absorbing invisible parts uniform
// on [w - |w|, w + |w|], and sets the last invisible part so that
// visible + sum(invisible) = (1+m) w.
absl::StatusOr<SplitState> SplitModel(const ModelVec& w, const SplitRule& rule,
                                      Rng& rng);

// Same construction with a caller-chosen visible part.
SplitState SplitWithVisible(const ModelVec& w, const ModelVec& visible, int m,
                            Rng& rng);

// Replaces the visible part and moves the difference into the last invisible
// part, keeping the sum constraint.
void ReplaceVisible(SplitState& state, const ModelVec& visible);

absl::Status CheckSumConstraint(const SplitState& state,
                                double rel_tol = 1e-9);

// Sorted per-coordinate endpoints of the uniform visible interval.
void UniformInterval(const ModelVec& w, double eps_split, int m, ModelVec* lo,
                     ModelVec* hi);

// z[k] = visible[k] + sum invisible[k]; checks
// z[k+1] = z[k] + eps (global[k] - drift_ref[k]) where drift_ref defaults to
// the visible history.
absl::StatusOr<std::vector<ModelVec>> ZSequence(
    std::span<const ModelVec> visible,
    std::span<const ModelVec> invisible_sum,
    std::span<const ModelVec> global, double epsilon,
    std::span<const ModelVec> drift_ref = {}, double tol = 1e-9);

absl::StatusOr<double> LaplaceSplitDensity(const ModelVec& w, double scale,
                                           const ModelVec& x);

}  // namespace fedsplit

#endif  // FEDSPLIT_SPLITTING_H_
