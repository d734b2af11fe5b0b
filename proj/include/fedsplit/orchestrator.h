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

#ifndef FEDSPLIT_ORCHESTRATOR_H_
#define FEDSPLIT_ORCHESTRATOR_H_

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsplit/consensus.h"
#include "fedsplit/problem.h"
#include "fedsplit/spectral.h"
#include "fedsplit/splitting.h"

namespace fedsplit {

enum class Algorithm { kFedAvg, kLdp, kMsp, kMspdq };

std::string AlgorithmName(Algorithm a);
absl::StatusOr<Algorithm> ParseAlgorithm(const std::string& name);

struct FLConfig {
  Algorithm mode = Algorithm::kMsp;
  int N = 1;
  int M = 1;
  int E = 1;
  int T = 1;
  double epsilon = 0.0;
  SplitRule split;
  // Per-client invisible counts; empty means split.m for every client.
  std::vector<int> m_per_client;
  double gamma = 0.0;
  // Per-client gamma_i; empty means gamma for every client.
  std::vector<double> gamma_per_client;
  StepWeights::Rule msp_rule = StepWeights::Rule::kConstant;
  double lambda = 0.0;
  int bits = 0;
  // 0 means 2^bits.
  int levels = 0;
  uint64_t seed = 0;
  double radius = 0.0;
  // Width of the initial MSPDQ interval R_t[0].
  double init_width = 8.0;
  double w0 = 0.0;
  double ldp_scale = 0.0;
  // Overrides the K_t schedule when positive.
  int fixed_K = 0;
  bool enforce_bit_budget = false;
  bool strict_intervals = true;
  int probe_rounds = 60;
  // Learning rounds whose consensus traces are kept.
  std::set<int> trace_rounds;

  int Levels() const { return levels > 0 ? levels : (1 << bits); }
  int InvisibleCount(int client) const;
  double Gamma(int client) const;
};

// Structural checks plus the theorem gates on epsilon, gamma and lambda.
absl::Status ValidateConfig(const FLConfig& config,
                            std::span<const QuadraticClientLoss> losses);

double Vartheta(double L, double mu, int E);
double LrSchedule(int t, double mu, double vartheta);
absl::StatusOr<int> KtSchedule(int t, double mu, double vartheta,
                               double lambda, ConsensusMode mode);

absl::StatusOr<std::vector<int>> SampleClients(std::span<const double> p,
                                               int M, Rng& rng);

// E steps of w <- w - eta g(w).
ModelVec LocalSgd(const ModelVec& w0, const QuadraticClientLoss& loss,
                  double eta, int E, Rng& rng);

struct RoundMetrics {
  int t = 0;
  double gap = 0.0;
  double dist2 = 0.0;
  int K = 0;
  uint64_t uploads = 0;
  uint64_t bits = 0;
  double max_width = 0.0;
  double max_delta_ratio = 0.0;
  double w_tilde = 0.0;
  double pi = 0.0;
};

struct RunResult {
  std::vector<RoundMetrics> rounds;
  double w_tilde_max = 0.0;
  double pi_max = 0.0;
  double pi_min = 0.0;
  int interval_violations = 0;
  int delta_violations = 0;
  int deviation_violations = 0;
  double max_delta_ratio = 0.0;
  double max_conservation_drift = 0.0;
  bool bit_budget_ok = true;
  ModelVec final_model;
  std::vector<ConsensusTrace> traces;
};

absl::StatusOr<RunResult> RunFedAvg(const FLConfig& config,
                                    std::span<const QuadraticClientLoss> losses);
absl::StatusOr<RunResult> RunLdp(const FLConfig& config,
                                 std::span<const QuadraticClientLoss> losses);
absl::StatusOr<RunResult> RunMspFl(const FLConfig& config,
                                   std::span<const QuadraticClientLoss> losses);
absl::StatusOr<RunResult> RunMspdqFl(
    const FLConfig& config, std::span<const QuadraticClientLoss> losses);
absl::StatusOr<RunResult> RunAlgorithm(
    const FLConfig& config, std::span<const QuadraticClientLoss> losses);

struct TheoremConstants {
  double mu = 0.0;
  double L = 0.0;
  int E = 1;
  int M = 1;
  int dim = 1;
  int bits = 1;
  double vartheta = 0.0;
  double C = 0.0;
  double lambda = 0.0;
  double contraction_rate = 0.0;
  double w_max_norm = 0.0;
  double pi_tilde = 0.0;
  double gamma_max = 0.0;
  double D1 = 0.0;
  double D2 = 0.0;
  double D3 = 0.0;
  double nu1 = 0.0;
  double nu2 = 0.0;
  double dist0_sq = 0.0;

  double BoundCurve(int t, bool quantized) const;
};

double SplitFactor(double epsilon);
double ComputeD3(int dim, double gamma_max, double pi_tilde, int M, int bits);

// C is fitted from a contraction probe of the mode's step-weight schedule.
absl::StatusOr<TheoremConstants> ComputeTheoremConstants(
    const FLConfig& config, std::span<const QuadraticClientLoss> losses,
    double pi_tilde);

// M ceil(I) (1 + mu vartheta + mu/2 (1 + ceil(I))), I = nu2/(rho d0) - vartheta.
double CommComplexityBound(double rho, const TheoremConstants& c);
double CommComplexityFormula(int M, double mu, double vartheta,
                             double ceil_I);
uint64_t CommCounter(std::span<const RoundMetrics> metrics);

// Uploads until the per-t mean squared distance first reaches
// rho * dist0_sq; nullopt if never.
std::optional<uint64_t> UploadsToReach(std::span<const double> mean_dist2,
                                       std::span<const uint64_t> uploads,
                                       double rho, double dist0_sq);

// One run per seed on a shared problem. Seeds run in parallel on
// FEDSPLIT_THREADS workers (default: hardware concurrency); results keep the
// seed order.
absl::StatusOr<std::vector<RunResult>> RunSeeds(
    const FLConfig& config, std::span<const QuadraticClientLoss> losses,
    std::span<const uint64_t> seeds);

int WorkerThreads();

// Least-squares slope of log(y) on log(t) over t in [t_lo, t_hi] (1-based).
double LogLogSlope(std::span<const double> y, int t_lo, int t_hi);

}  // namespace fedsplit

#endif  // FEDSPLIT_ORCHESTRATOR_H_
