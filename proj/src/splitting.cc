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

#include "fedsplit/splitting.h"

#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace fedsplit {

ModelVec SplitState::Total() const {
  ModelVec total = visible;
  for (const auto& v : invisible) total += v;
  return total;
}

absl::Status ValidateSplitRule(const SplitRule& rule) {
  if (rule.m < 1) return absl::InvalidArgumentError("m must be >= 1");
  if (const auto* u = std::get_if<UniformSplit>(&rule.variant)) {
    if (!(u->eps_split >= 0.0 && u->eps_split < 1.0)) {
      return absl::InvalidArgumentError("eps_split must lie in [0, 1)");
    }
  } else {
    const auto& l = std::get<LaplaceSplit>(rule.variant);
    if (!(l.scale > 0.0)) {
      return absl::InvalidArgumentError("laplace scale must be > 0");
    }
  }
  return absl::OkStatus();
}

void UniformInterval(const ModelVec& w, double eps_split, int m, ModelVec* lo,
                     ModelVec* hi) {
  const ModelVec e1 = eps_split * w;
  const ModelVec e2 = (1.0 + m - eps_split) * w;
  *lo = e1.cwiseMin(e2);
  *hi = e1.cwiseMax(e2);
}

SplitState SplitWithVisible(const ModelVec& w, const ModelVec& visible, int m,
                            Rng& rng) {
  SplitState s;
  s.origin = w;
  s.visible = visible;
  s.invisible.assign(m, ModelVec::Zero(w.size()));
  ModelVec rest = (1.0 + m) * w - visible;
  for (int n = 0; n + 1 < m; ++n) {
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      const double mag = std::abs(w(j));
      s.invisible[n](j) = w(j) - mag + 2.0 * mag * Uniform01(rng);
    }
    rest -= s.invisible[n];
  }
  s.invisible[m - 1] = rest;
  return s;
}

absl::StatusOr<SplitState> SplitModel(const ModelVec& w, const SplitRule& rule,
                                      Rng& rng) {
  if (auto st = ValidateSplitRule(rule); !st.ok()) return st;
  ModelVec visible(w.size());
  if (const auto* u = std::get_if<UniformSplit>(&rule.variant)) {
    ModelVec lo, hi;
    UniformInterval(w, u->eps_split, rule.m, &lo, &hi);
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      const double r = u->midpoint ? 0.5 : Uniform01(rng);
      visible(j) = lo(j) + r * (hi(j) - lo(j));
    }
  } else {
    const double scale = std::get<LaplaceSplit>(rule.variant).scale;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      // Inverse CDF on (-1/2, 1/2).
      double r = Uniform01(rng) - 0.5;
      while (r == -0.5) r = Uniform01(rng) - 0.5;
      const double sgn = r < 0.0 ? -1.0 : 1.0;
      visible(j) = w(j) - scale * sgn * std::log1p(-2.0 * std::abs(r));
    }
  }
  SplitState s = SplitWithVisible(w, visible, rule.m, rng);
  if (auto st = CheckSumConstraint(s); !st.ok()) return st;
  return s;
}

void ReplaceVisible(SplitState& state, const ModelVec& visible) {
  state.invisible.back() += state.visible - visible;
  state.visible = visible;
}

absl::Status CheckSumConstraint(const SplitState& state, double rel_tol) {
  const ModelVec target = (1.0 + state.m()) * state.origin;
  const double err = (state.Total() - target).norm();
  const double scale = std::max(1.0, target.norm());
  if (err > rel_tol * scale) {
    return absl::InternalError(
        absl::StrCat("sum constraint violated by ", err));
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<ModelVec>> ZSequence(
    std::span<const ModelVec> visible, std::span<const ModelVec> invisible_sum,
    std::span<const ModelVec> global, double epsilon,
    std::span<const ModelVec> drift_ref, double tol) {
  if (visible.size() != invisible_sum.size() || visible.empty() ||
      global.size() + 1 < visible.size()) {
    return absl::InvalidArgumentError("misaligned round histories");
  }
  if (drift_ref.empty()) drift_ref = visible;
  std::vector<ModelVec> z;
  z.reserve(visible.size());
  for (size_t k = 0; k < visible.size(); ++k) {
    z.push_back(visible[k] + invisible_sum[k]);
    if (k == 0) continue;
    const ModelVec expect =
        z[k - 1] + epsilon * (global[k - 1] - drift_ref[k - 1]);
    const double err = (z[k] - expect).norm();
    if (err > tol * std::max(1.0, expect.norm())) {
      return absl::InternalError(
          absl::StrCat("z recursion violated at k=", k, " by ", err));
    }
  }
  return z;
}

absl::StatusOr<double> LaplaceSplitDensity(const ModelVec& w, double scale,
                                           const ModelVec& x) {
  if (!(scale > 0.0)) return absl::InvalidArgumentError("scale must be > 0");
  if (w.size() != x.size()) return absl::InvalidArgumentError("size mismatch");
  double log_density = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    log_density += -std::log(2.0 * scale) - std::abs(x(j) - w(j)) / scale;
  }
  return std::exp(log_density);
}

}  // namespace fedsplit
