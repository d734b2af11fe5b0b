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

#ifndef FEDSPLIT_PROBLEM_H_
#define FEDSPLIT_PROBLEM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "Eigen/Dense"
#include "absl/status/statusor.h"
#include "fedsplit/rng.h"
#include "json.hpp"

namespace fedsplit {

using ModelVec = Eigen::VectorXd;

// F_i(w) = 1/2 (w - b_i)^T A_i (w - b_i). The per-sample losses share A_i and
// have targets b_i + offsets[s]; offsets have zero mean so their average is
// exactly F_i up to a constant.
struct QuadraticClientLoss {
  Eigen::MatrixXd a;
  ModelVec b;
  double p = 0.0;
  std::vector<ModelVec> offsets;
  int batch_size = 1;
};

struct ProblemOptions {
  double mu = 1.0;
  double L = 2.0;
  double center = 2.0;
  int samples_per_client = 50;
  double sample_noise = 1.0;
  int batch_size = 1;
};

struct Optimum {
  ModelVec w_star;
  double f_star = 0.0;
};

struct ProblemConstants {
  double mu = 0.0;
  double L = 0.0;
  double gamma_het = 0.0;
  std::vector<double> sigma;
  double G = 0.0;
  double radius = 0.0;
  double w_max_norm = 0.0;
  ModelVec w_star;
  double f_star = 0.0;
};

// Builds n_clients losses with minimizers b_i = center + spread*(i-(N-1)/2)*v_i,
// v_i a random unit direction with nonnegative first coordinate. Curvatures
// are random rotations of spectra in [mu, L] that include both endpoints.
absl::StatusOr<std::vector<QuadraticClientLoss>> MakeQuadraticProblem(
    int n_clients, int dim, double spread, uint64_t seed,
    const ProblemOptions& options = {});

// Gamma scales as spread^2 for a fixed seed, so the spread for a target
// heterogeneity is found in closed form.
absl::StatusOr<double> SpreadForGamma(int n_clients, int dim,
                                      double target_gamma, uint64_t seed,
                                      const ProblemOptions& options = {});

absl::Status ValidateLosses(std::span<const QuadraticClientLoss> losses);

double ClientLoss(const QuadraticClientLoss& loss, const ModelVec& w);
double GlobalLoss(std::span<const QuadraticClientLoss> losses,
                  const ModelVec& w);
ModelVec FullGradient(const QuadraticClientLoss& loss, const ModelVec& w);

absl::StatusOr<Optimum> GlobalOptimum(
    std::span<const QuadraticClientLoss> losses);
double HeterogeneityGamma(std::span<const QuadraticClientLoss> losses);

// Mean of per-sample gradients over the batch.
absl::StatusOr<ModelVec> StochasticGradient(const QuadraticClientLoss& loss,
                                            const ModelVec& w,
                                            std::span<const int> batch);

// batch_size indices drawn uniformly with replacement.
std::vector<int> DrawBatch(const QuadraticClientLoss& loss, Rng& rng);

// E||g - grad F_i||^2 for batches drawn by DrawBatch.
double GradientVariance(const QuadraticClientLoss& loss);

// G bounds E||g||^2 on the ball of the given radius around w_star.
absl::StatusOr<ProblemConstants> ComputeConstants(
    std::span<const QuadraticClientLoss> losses, double radius);

nlohmann::json ProblemToJson(std::span<const QuadraticClientLoss> losses);
absl::StatusOr<std::vector<QuadraticClientLoss>> ProblemFromJson(
    const nlohmann::json& doc);

}  // namespace fedsplit

#endif  // FEDSPLIT_PROBLEM_H_
