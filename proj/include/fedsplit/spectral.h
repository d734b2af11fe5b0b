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

#ifndef FEDSPLIT_SPECTRAL_H_
#define FEDSPLIT_SPECTRAL_H_

#include <span>
#include <vector>

#include "Eigen/Dense"
#include "absl/status/statusor.h"

namespace fedsplit {

// U_ij = eps/M off the diagonal, U_ii = 1 - eps(M-1)/M.
absl::StatusOr<Eigen::MatrixXd> BuildU(int M, double epsilon);

// Eigenvalues of a symmetric matrix, largest first.
std::vector<double> SymmetricEigenvalues(const Eigen::MatrixXd& m);
double Lambda2(const Eigen::MatrixXd& u);
double LambdaMin(const Eigen::MatrixXd& u);

// Upper bound lambda_min/(1+lambda_min) on the summed step weights.
double StepWeightBound(double lambda_min_u);

bool IsPsd(const Eigen::MatrixXd& m);

// Schedule of step weights a_{i,n}[k] = gamma_i * r(k) / m_i, where r is 1
// (constant) or 1/(k+1) (harmonic). Summing over the m_i invisible parts of
// client i gives gamma_i * r(k).
class StepWeights {
 public:
  enum class Rule { kConstant, kHarmonic };

  StepWeights(Rule rule, std::vector<double> gamma, std::vector<int> m);
  static StepWeights Uniform(Rule rule, int clients, double gamma, int m);

  Rule rule() const { return rule_; }
  int clients() const { return static_cast<int>(gamma_.size()); }
  int invisible_count(int i) const { return m_[i]; }
  double gamma(int i) const { return gamma_[i]; }

  double At(int i, int n, int k) const;
  // max_i a_{i,n}[k] for n = 0 (the quantity sizing intervals).
  double MaxAt(int k) const;
  // sum_n max_i a_{i,n}[k].
  double SummedMaxAt(int k) const;

  // Checks the positivity, monotonicity and summed-max conditions at round k.
  absl::Status Validate(double lambda_min_u, int k) const;

 private:
  Rule rule_;
  std::vector<double> gamma_;
  std::vector<int> m_;
};

// Transition matrix of the splitting dynamics in block form
//   [U - sum_n A_n, A_1, ..., A_m; A_n, I - A_n on the diagonal].
// a[n][i] is the weight of client i's n-th invisible part; clients with fewer
// parts pass 0. Rejects weights violating the summed-max bound.
absl::StatusOr<Eigen::MatrixXd> BuildP(
    const Eigen::MatrixXd& u, const std::vector<std::vector<double>>& a);

// Builds P[k] from a StepWeights schedule with a common m.
absl::StatusOr<Eigen::MatrixXd> BuildPFromSchedule(const Eigen::MatrixXd& u,
                                                   const StepWeights& weights,
                                                   int k);

// Ordered product P[k] ... P[0] where ps = {P[0], ..., P[k]}.
absl::StatusOr<Eigen::MatrixXd> PhiProduct(
    std::span<const Eigen::MatrixXd> ps);

double MaxDeviationFrom(const Eigen::MatrixXd& m, double value);

struct ContractionProbe {
  // deviations[k] = max_ij |Phi(k,0)_ij - 1/((1+m)M)|.
  std::vector<double> deviations;
  // Geometric-mean contraction over the probe horizon.
  double rate = 0.0;
  // Smallest C with deviations[k] <= C lambda^(k+1) for the given lambda.
  double C = 0.0;
};

absl::StatusOr<ContractionProbe> ProbeContraction(int M, double epsilon,
                                                  const StepWeights& weights,
                                                  int rounds, double lambda);

}  // namespace fedsplit

#endif  // FEDSPLIT_SPECTRAL_H_
