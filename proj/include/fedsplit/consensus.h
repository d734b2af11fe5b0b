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

#ifndef FEDSPLIT_CONSENSUS_H_
#define FEDSPLIT_CONSENSUS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsplit/problem.h"
#include "fedsplit/quantizer.h"
#include "fedsplit/spectral.h"
#include "fedsplit/splitting.h"

namespace fedsplit {

enum class ConsensusMode { kMsp, kMspdq };

// weights[i][n] holds the per-coordinate weight of client i's n-th invisible
// part for one round.
using WeightTable = std::vector<std::vector<ModelVec>>;

WeightTable ScheduleWeights(const StepWeights& schedule, int k, int dim);

// Replaces the 1/M weight client `client` puts on (ref_partner - ref_client)
// in its drift term by `weight` (elementwise).
struct DriftOverride {
  int client = 0;
  int partner = 0;
  ModelVec weight;
};

struct RoundState {
  std::vector<SplitState> clients;
  // What the server received: visible parts (MSP) or dequantized uploads.
  std::vector<ModelVec> uploads;
  ModelVec global;
  int k = 0;
  int t = 0;

  int M() const { return static_cast<int>(clients.size()); }
};

// uploads = visible parts, global = their mean.
RoundState MakeRoundState(std::vector<SplitState> clients, int t = 0);

ModelVec MeanOf(std::span<const ModelVec> v);
ModelVec ConservedSum(const RoundState& state);

// alpha <- alpha + eps sum_j (1/M)(u_j - u_i) + sum_n a_n (beta_n - alpha)
// beta_n <- beta_n + a_n (alpha - beta_n), with u the uploads of round k.
// MSP then sets uploads = alpha and global = mean.
void ApplySplitDynamics(RoundState& state, double epsilon,
                        const WeightTable& weights,
                        std::span<const DriftOverride> overrides = {});
void MspRound(RoundState& state, double epsilon, const WeightTable& weights,
              std::span<const DriftOverride> overrides = {});

struct QuantRoundInfo {
  double max_delta_norm = 0.0;
  double delta_bound = 0.0;
  double max_width = 0.0;
  int interval_violations = 0;
  int delta_violations = 0;
  uint64_t payload_bits = 0;
};

// One quantized round: update, shrink each interval to q[k] +/- pi a/2,
// check containment, quantize, encode, decode and aggregate. With strict set
// an interval violation is an error; otherwise it is counted and the value is
// clamped so the sweep can continue.
absl::Status MspdqRound(RoundState& state,
                        std::vector<QuantizerState>& intervals, double epsilon,
                        const WeightTable& weights, double pi_t,
                        double a_max_k, uint64_t seed, bool strict,
                        QuantRoundInfo* info);

// Sum over invisible index n of ||W^alpha - W^{beta_n}||_F.
double VisibleInvisibleGap(const RoundState& state);

struct TraceRound {
  int k = 0;
  std::vector<ModelVec> visible;
  std::vector<ModelVec> uploads;
  ModelVec global;
  std::vector<std::vector<ModelVec>> invisible;
  // Weights applied when moving from k to k+1 (empty on the last record).
  WeightTable weights;
  double pi = 0.0;
};

TraceRound SnapshotRound(const RoundState& state);

struct ConsensusTrace {
  int t = 0;
  double epsilon = 0.0;
  ConsensusMode mode = ConsensusMode::kMsp;
  std::vector<int> client_ids;
  std::vector<SplitState> initial;
  std::vector<DriftOverride> round0_overrides;
  std::vector<TraceRound> rounds;
};

struct ConsensusOptions {
  ConsensusMode mode = ConsensusMode::kMsp;
  int K = 1;
  double epsilon = 0.5;
  const StepWeights* weights = nullptr;
  // MSPDQ only.
  int levels = 256;
  double lambda2_u = 0.5;
  uint64_t seed = 0;
  bool strict = true;
  // Lemma 9 style deviation check uses this contraction constant.
  double lambda = 0.9;
  bool record_trace = false;
};

struct ConsensusDiagnostics {
  double w_tilde_max = 0.0;
  double pi_max = 0.0;
  double max_delta_ratio = 0.0;
  double max_width = 0.0;
  int interval_violations = 0;
  int delta_violations = 0;
  int deviation_violations = 0;
  uint64_t uploads = 0;
  uint64_t payload_bits = 0;
  double conservation_drift = 0.0;
};

struct ConsensusResult {
  RoundState final_state;
  ConsensusTrace trace;
  ConsensusDiagnostics diag;
};

// Iterates K rounds. MSPDQ requires one initial interval per client that
// contains its visible part; the initial upload is quantized on it.
absl::StatusOr<ConsensusResult> RunConsensus(
    RoundState initial, const ConsensusOptions& options,
    std::vector<QuantizerState> initial_intervals = {},
    std::vector<int> client_ids = {});

// Limit of every submodel under exact dynamics: total / ((1+m) M) for a
// common m.
ModelVec ConsensusLimit(const RoundState& state);

// Trace export, one JSON object per round.
std::string TraceToJsonLines(const ConsensusTrace& trace);

}  // namespace fedsplit

#endif  // FEDSPLIT_CONSENSUS_H_
