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

#ifndef FEDSPLIT_PRIVACY_AUDIT_H_
#define FEDSPLIT_PRIVACY_AUDIT_H_

#include <map>
#include <span>
#include <set>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsplit/consensus.h"
#include "fedsplit/problem.h"
#include "fedsplit/rng.h"

namespace fedsplit {

// What a corrupted client contributes to the adversary's knowledge in one
// consensus round.
struct CorruptedRecord {
  std::vector<ModelVec> invisible;
  // Weights applied when moving to the next round; empty on the last record.
  std::vector<ModelVec> weights;
  ModelVec drift_weight;
};

struct ViewRound {
  int k = 0;
  std::vector<ModelVec> visible;
  ModelVec global;
  std::map<int, CorruptedRecord> corrupted;
};

// Server view plus the records of corrupted clients. Holds no invisible
// counts and nothing about honest clients beyond their visible parts.
struct AdversaryView {
  int t = 0;
  double epsilon = 0.0;
  std::set<int> corrupted;
  std::vector<ViewRound> rounds;
};

// Slots in `audited` must stay honest.
absl::StatusOr<AdversaryView> RecordView(const ConsensusTrace& trace,
                                         const std::set<int>& corrupted,
                                         const std::set<int>& audited = {});

struct ViewDiff {
  double max_deviation = 0.0;
  std::string location;
};

ViewDiff CompareViews(const AdversaryView& a, const AdversaryView& b);

// Perturbed initial state and round-0 weights that move e from client j's
// local model to client i's without changing any observable quantity.
struct EquivalenceWitness {
  int i = 0;
  int j = 0;
  ModelVec e;
  // Absorbing invisible parts of i and j.
  int p = 0;
  int q = 0;
  std::vector<SplitState> initial;
  WeightTable round0;
  std::vector<DriftOverride> overrides;
};

// Needs a recorded MSP trace. Coordinates with |denominator| < 1e-12 give a
// FailedPrecondition ("witness-degenerate").
absl::StatusOr<EquivalenceWitness> ConstructWitness(const ConsensusTrace& trace,
                                                    int i, int j,
                                                    const ModelVec& e);

// Re-runs the consensus from the witness state with the original weights
// after round 0.
absl::StatusOr<ConsensusTrace> ReplayWitness(const EquivalenceWitness& witness,
                                             const ConsensusTrace& original);

struct ReplayReport {
  double max_deviation = 0.0;
  bool pass = false;
  std::string location;
};

ReplayReport ReplayAndCompare(const EquivalenceWitness& witness,
                              const ConsensusTrace& original,
                              const AdversaryView& original_view,
                              double tol = 1e-6);

enum class WitnessParam {
  kBetaP,
  kBetaQ,
  kWeightP,
  kWeightQ,
  kDriftI,
  kDriftJ,
};

inline constexpr WitnessParam kAllWitnessParams[] = {
    WitnessParam::kBetaP,   WitnessParam::kBetaQ,  WitnessParam::kWeightP,
    WitnessParam::kWeightQ, WitnessParam::kDriftI, WitnessParam::kDriftJ};

std::string WitnessParamName(WitnessParam p);

double WitnessParamValue(const EquivalenceWitness& witness,
                         WitnessParam param, int coord);

// Adds delta to one coordinate of one witness parameter.
EquivalenceWitness MutateWitness(const EquivalenceWitness& witness,
                                 WitnessParam param, int coord, double delta);

// Mutation size in state units: 0.5 max(1, |v|) for an initial part. Weights
// multiply a round-0 difference g (eps g for drift weights), so they move by
// 0.5 max(1, |v g|) / |g|. Returns 0 when |g| < 1e-12 (no observable effect).
double MutationDelta(const EquivalenceWitness& witness, double epsilon,
                     WitnessParam param, int coord);

// z[0] = (1+m) alpha_i[K] - eps sum_{k<K} (global[k] - alpha_i[k]),
// returned divided by (1+m).
absl::StatusOr<ModelVec> ZInferenceAttack(const AdversaryView& view,
                                          int client, int assumed_m);

// Rebuilds a trace in which `client` holds new_m invisible parts and the
// local model alpha[0] + (1+m)/(1+new_m) (w - alpha[0]). Its per-round
// weights are chosen so every observable quantity matches the original.
absl::StatusOr<ConsensusTrace> ConstructHiddenMPartner(
    const ConsensusTrace& trace, int client, int new_m, Rng& rng);

struct WitnessAuditOptions {
  int tuples = 50;
  std::vector<double> magnitudes = {1e-3, 1.0, 1e3, 1e6};
  uint64_t seed = 0;
  double tol = 1e-6;
  double mutation_threshold = 1e-3;
  // Negative control: replay a mutated witness instead of the real one.
  bool mutate = false;
  int max_redraws = 100;
};

struct WitnessAuditCase {
  int trace_index = 0;
  int i = 0;
  int j = 0;
  double magnitude = 0.0;
  std::vector<int> corrupted;
  int redraws = 0;
  double replay_deviation = 0.0;
  std::string replay_location;
  bool replay_pass = false;
  // Smallest view deviation over every (parameter, coordinate) mutation.
  double min_mutation_deviation = 0.0;
  std::string weakest_mutation;
  bool mutations_detected = false;
};

struct WitnessAuditReport {
  std::vector<WitnessAuditCase> cases;
  bool all_pass = false;
};

// Draws (trace, i, j, e, corrupted set) tuples; e has a uniformly random
// direction and the magnitudes cycle. Degenerate draws are redrawn.
absl::StatusOr<WitnessAuditReport> RunWitnessAudit(
    std::span<const ConsensusTrace> traces, const WitnessAuditOptions& options);

struct DpAuditCase {
  double c4 = 0.0;
  int levels = 2;
  int bits = 1;
  double lo = 0.0;
  // pi_t * a^max[k].
  double width = 1.0;
};

struct DpAuditRow {
  DpAuditCase config;
  double delta_formula = 0.0;
  double delta_measured = 0.0;
  bool ok = false;
};

// Exact max total variation between the output laws of scalar inputs at
// distance <= c4 inside the interval. The TV is piecewise linear between
// knobs, so knobs, knob +- c4 and a uniform grid cover every maximizer.
absl::StatusOr<DpAuditRow> QuantizerDpAudit(const DpAuditCase& c,
                                            int grid = 101);

}  // namespace fedsplit

#endif  // FEDSPLIT_PRIVACY_AUDIT_H_
