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

#include "fedsplit/spectral.h"

#include <algorithm>
#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace fedsplit {

absl::StatusOr<Eigen::MatrixXd> BuildU(int M, double epsilon) {
  if (M < 1) return absl::InvalidArgumentError("M must be >= 1");
  const double upper =
      M == 1 ? std::numeric_limits<double>::infinity() : M / (M - 1.0);
  if (!(epsilon > 0.0) || !(epsilon < upper)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "epsilon ", epsilon, " outside (0, M/(M-1)) = (0, ", upper, ")"));
  }
  Eigen::MatrixXd u = Eigen::MatrixXd::Constant(M, M, epsilon / M);
  u.diagonal().setConstant(1.0 - epsilon * (M - 1) / M);
  return u;
}

std::vector<double> SymmetricEigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      m, Eigen::EigenvaluesOnly);
  std::vector<double> ev(es.eigenvalues().data(),
                         es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

double Lambda2(const Eigen::MatrixXd& u) {
  const auto ev = SymmetricEigenvalues(u);
  return ev.size() > 1 ? ev[1] : ev[0];
}

double LambdaMin(const Eigen::MatrixXd& u) {
  return SymmetricEigenvalues(u).back();
}

double StepWeightBound(double lambda_min_u) {
  return lambda_min_u / (1.0 + lambda_min_u);
}

bool IsPsd(const Eigen::MatrixXd& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return SymmetricEigenvalues(m).back() >= -1e-10 * scale;
}

StepWeights::StepWeights(Rule rule, std::vector<double> gamma,
                         std::vector<int> m)
    : rule_(rule), gamma_(std::move(gamma)), m_(std::move(m)) {}

StepWeights StepWeights::Uniform(Rule rule, int clients, double gamma, int m) {
  return StepWeights(rule, std::vector<double>(clients, gamma),
                     std::vector<int>(clients, m));
}

double StepWeights::At(int i, int n, int k) const {
  if (n >= m_[i]) return 0.0;
  const double r = rule_ == Rule::kConstant ? 1.0 : 1.0 / (k + 1.0);
  return gamma_[i] * r / m_[i];
}

double StepWeights::MaxAt(int k) const {
  double best = 0.0;
  for (int i = 0; i < clients(); ++i) best = std::max(best, At(i, 0, k));
  return best;
}

double StepWeights::SummedMaxAt(int k) const {
  const int m = *std::max_element(m_.begin(), m_.end());
  double sum = 0.0;
  for (int n = 0; n < m; ++n) {
    double best = 0.0;
    for (int i = 0; i < clients(); ++i) best = std::max(best, At(i, n, k));
    sum += best;
  }
  return sum;
}

absl::Status StepWeights::Validate(double lambda_min_u, int k) const {
  for (int i = 0; i < clients(); ++i) {
    if (m_[i] < 1) {
      return absl::InvalidArgumentError(
          absl::StrCat("client ", i, " has no invisible parts"));
    }
    if (!(gamma_[i] > 0.0)) {
      return absl::InvalidArgumentError(
          absl::StrCat("gamma_", i, " must be > 0"));
    }
  }
  const double bound = StepWeightBound(lambda_min_u);
  const double summed = SummedMaxAt(k);
  if (!(summed < bound)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "sum_n max_i a_{i,n}[", k, "] = ", summed,
        " violates bound lambda_min/(1+lambda_min) = ", bound));
  }
  return absl::OkStatus();
}

absl::StatusOr<Eigen::MatrixXd> BuildP(
    const Eigen::MatrixXd& u, const std::vector<std::vector<double>>& a) {
  const int M = static_cast<int>(u.rows());
  const int m = static_cast<int>(a.size());
  if (m < 1) return absl::InvalidArgumentError("need at least one invisible");
  double summed = 0.0;
  for (int n = 0; n < m; ++n) {
    if (static_cast<int>(a[n].size()) != M) {
      return absl::InvalidArgumentError("step weight vector length != M");
    }
    double best = 0.0;
    for (double x : a[n]) {
      if (x < 0.0) return absl::InvalidArgumentError("negative step weight");
      best = std::max(best, x);
    }
    summed += best;
  }
  const double bound = StepWeightBound(LambdaMin(u));
  if (summed > 0.0 && !(summed < bound)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "sum_n max_i a_n = ", summed,
        " violates bound lambda_min/(1+lambda_min) = ", bound));
  }
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero((1 + m) * M, (1 + m) * M);
  p.topLeftCorner(M, M) = u;
  for (int n = 0; n < m; ++n) {
    const int off = (1 + n) * M;
    for (int i = 0; i < M; ++i) {
      const double w = a[n][i];
      p(i, i) -= w;
      p(i, off + i) = w;
      p(off + i, i) = w;
      p(off + i, off + i) = 1.0 - w;
    }
  }
  return p;
}

absl::StatusOr<Eigen::MatrixXd> BuildPFromSchedule(const Eigen::MatrixXd& u,
                                                   const StepWeights& weights,
                                                   int k) {
  const int M = static_cast<int>(u.rows());
  if (weights.clients() != M) {
    return absl::InvalidArgumentError("schedule size != M");
  }
  int m = 0;
  for (int i = 0; i < M; ++i) m = std::max(m, weights.invisible_count(i));
  std::vector<std::vector<double>> a(m, std::vector<double>(M, 0.0));
  for (int n = 0; n < m; ++n) {
    for (int i = 0; i < M; ++i) a[n][i] = weights.At(i, n, k);
  }
  return BuildP(u, a);
}

absl::StatusOr<Eigen::MatrixXd> PhiProduct(
    std::span<const Eigen::MatrixXd> ps) {
  if (ps.empty()) return absl::InvalidArgumentError("empty product");
  Eigen::MatrixXd phi = ps.front();
  for (size_t k = 1; k < ps.size(); ++k) {
    if (ps[k].rows() != phi.rows() || ps[k].cols() != phi.cols()) {
      return absl::InvalidArgumentError(
          absl::StrCat("dimension mismatch at factor ", k));
    }
    phi = ps[k] * phi;
  }
  return phi;
}

double MaxDeviationFrom(const Eigen::MatrixXd& m, double value) {
  return (m.array() - value).abs().maxCoeff();
}

absl::StatusOr<ContractionProbe> ProbeContraction(int M, double epsilon,
                                                  const StepWeights& weights,
                                                  int rounds, double lambda) {
  if (rounds < 1) return absl::InvalidArgumentError("rounds must be >= 1");
  if (!(lambda > 0.0 && lambda < 1.0)) {
    return absl::InvalidArgumentError("lambda must lie in (0,1)");
  }
  auto u = BuildU(M, epsilon);
  if (!u.ok()) return u.status();
  ContractionProbe probe;
  Eigen::MatrixXd phi;
  double target = 0.0;
  for (int k = 0; k < rounds; ++k) {
    auto p = BuildPFromSchedule(*u, weights, k);
    if (!p.ok()) return p.status();
    phi = k == 0 ? *p : Eigen::MatrixXd(*p * phi);
    target = 1.0 / static_cast<double>(phi.rows());
    const double dev = MaxDeviationFrom(phi, target);
    probe.deviations.push_back(dev);
    probe.C = std::max(probe.C, dev / std::pow(lambda, k + 1));
  }
  const double first = probe.deviations.front();
  const double last = probe.deviations.back();
  probe.rate = (first > 0.0 && last > 0.0 && rounds > 1)
                   ? std::pow(last / first, 1.0 / (rounds - 1))
                   : 0.0;
  return probe;
}

}  // namespace fedsplit
