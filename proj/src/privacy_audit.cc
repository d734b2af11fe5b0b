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

#include "fedsplit/privacy_audit.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "fedsplit/quantizer.h"
#include "fedsplit/splitting.h"

namespace fedsplit {
namespace {

constexpr double kDegenerate = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void Track(ViewDiff& diff, double dev, const std::string& where) {
  if (dev > diff.max_deviation || std::isnan(dev)) {
    diff.max_deviation = std::isnan(dev) ? kInf : dev;
    diff.location = where;
  }
}

double MaxAbsDiff(const ModelVec& a, const ModelVec& b) {
  if (a.size() != b.size()) return kInf;
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

void CompareLists(ViewDiff& diff, const std::vector<ModelVec>& a,
                  const std::vector<ModelVec>& b, const std::string& where) {
  if (a.size() != b.size()) {
    Track(diff, kInf, absl::StrCat(where, " size"));
    return;
  }
  for (size_t n = 0; n < a.size(); ++n) {
    Track(diff, MaxAbsDiff(a[n], b[n]), absl::StrCat(where, "[", n, "]"));
  }
}

absl::Status RunFrom(RoundState state, const ConsensusTrace& schedule,
                     const WeightTable& round0,
                     std::span<const DriftOverride> overrides,
                     ConsensusTrace* out) {
  const int K = static_cast<int>(schedule.rounds.size()) - 1;
  if (K < 1) return absl::InvalidArgumentError("trace has no rounds");
  out->rounds.push_back(SnapshotRound(state));
  for (int k = 0; k < K; ++k) {
    const WeightTable& w = k == 0 ? round0 : schedule.rounds[k].weights;
    MspRound(state, schedule.epsilon, w,
             k == 0 ? overrides : std::span<const DriftOverride>{});
    out->rounds.back().weights = w;
    out->rounds.push_back(SnapshotRound(state));
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<AdversaryView> RecordView(const ConsensusTrace& trace,
                                         const std::set<int>& corrupted,
                                         const std::set<int>& audited) {
  if (trace.rounds.empty()) return absl::InvalidArgumentError("empty trace");
  const int M = static_cast<int>(trace.rounds.front().visible.size());
  for (int c : corrupted) {
    if (c < 0 || c >= M) {
      return absl::InvalidArgumentError(absl::StrCat("no client slot ", c));
    }
    if (audited.contains(c)) {
      return absl::InvalidArgumentError(
          absl::StrCat("audited client ", c, " cannot be corrupted"));
    }
  }
  AdversaryView view;
  view.t = trace.t;
  view.epsilon = trace.epsilon;
  view.corrupted = corrupted;
  const int d = static_cast<int>(trace.rounds.front().global.size());
  for (const auto& r : trace.rounds) {
    ViewRound v;
    v.k = r.k;
    v.visible = r.visible;
    v.global = r.global;
    for (int c : corrupted) {
      CorruptedRecord rec;
      rec.invisible = r.invisible[c];
      if (!r.weights.empty()) rec.weights = r.weights[c];
      rec.drift_weight = ModelVec::Constant(d, 1.0 / M);
      if (r.k == 0) {
        for (const auto& o : trace.round0_overrides) {
          if (o.client == c) rec.drift_weight = o.weight;
        }
      }
      v.corrupted.emplace(c, std::move(rec));
    }
    view.rounds.push_back(std::move(v));
  }
  return view;
}

ViewDiff CompareViews(const AdversaryView& a, const AdversaryView& b) {
  ViewDiff diff;
  if (a.rounds.size() != b.rounds.size() || a.corrupted != b.corrupted) {
    Track(diff, kInf, "view shape");
    return diff;
  }
  for (size_t k = 0; k < a.rounds.size(); ++k) {
    const ViewRound& x = a.rounds[k];
    const ViewRound& y = b.rounds[k];
    const std::string at = absl::StrCat("k=", k, " ");
    CompareLists(diff, x.visible, y.visible, at + "visible");
    Track(diff, MaxAbsDiff(x.global, y.global), at + "global");
    for (const auto& [c, rx] : x.corrupted) {
      const CorruptedRecord& ry = y.corrupted.at(c);
      const std::string who = absl::StrCat(at, "client ", c, " ");
      CompareLists(diff, rx.invisible, ry.invisible, who + "invisible");
      CompareLists(diff, rx.weights, ry.weights, who + "weights");
      Track(diff, MaxAbsDiff(rx.drift_weight, ry.drift_weight),
            who + "drift weight");
    }
  }
  return diff;
}

absl::StatusOr<EquivalenceWitness> ConstructWitness(const ConsensusTrace& trace,
                                                    int i, int j,
                                                    const ModelVec& e) {
  if (trace.mode != ConsensusMode::kMsp) {
    return absl::InvalidArgumentError("witness needs an MSP trace");
  }
  if (trace.initial.empty() || trace.rounds.size() < 2) {
    return absl::InvalidArgumentError("trace lacks initial state or rounds");
  }
  const int M = static_cast<int>(trace.initial.size());
  if (i == j || i < 0 || j < 0 || i >= M || j >= M) {
    return absl::InvalidArgumentError("need two distinct client slots");
  }
  const SplitState& si = trace.initial[i];
  const SplitState& sj = trace.initial[j];
  if (e.size() != si.visible.size()) {
    return absl::InvalidArgumentError("perturbation dimension mismatch");
  }
  EquivalenceWitness w;
  w.i = i;
  w.j = j;
  w.e = e;
  w.p = si.m() - 1;
  w.q = sj.m() - 1;
  w.initial = trace.initial;
  w.round0 = trace.rounds.front().weights;
  const double mi = si.m();
  const double mj = sj.m();
  const double eps = trace.epsilon;
  const int d = static_cast<int>(e.size());

  SplitState& wi = w.initial[i];
  SplitState& wj = w.initial[j];
  wi.invisible[w.p] += (1.0 + mi) * e;
  wj.invisible[w.q] -= (1.0 + mj) * e;
  wi.origin += e;
  wj.origin -= e;

  ModelVec drift_i = ModelVec::Constant(d, 1.0 / M);
  ModelVec drift_j = ModelVec::Constant(d, 1.0 / M);
  ModelVec& ap = w.round0[i][w.p];
  ModelVec& aq = w.round0[j][w.q];
  const ModelVec& alpha_i = si.visible;
  const ModelVec& alpha_j = sj.visible;
  for (int c = 0; c < d; ++c) {
    if (e(c) == 0.0) continue;
    const double den_p = alpha_i(c) - wi.invisible[w.p](c);
    const double den_q = alpha_j(c) - wj.invisible[w.q](c);
    const double D = alpha_j(c) - alpha_i(c);
    if (std::abs(den_p) < kDegenerate || std::abs(den_q) < kDegenerate ||
        std::abs(eps * D) < kDegenerate) {
      return absl::FailedPreconditionError(
          absl::StrCat("witness-degenerate at coordinate ", c));
    }
    const double beta_p = si.invisible[w.p](c);
    const double beta_q = sj.invisible[w.q](c);
    ap(c) = (-(1.0 + mi) * e(c) + ap(c) * (alpha_i(c) - beta_p)) / den_p;
    aq(c) = ((1.0 + mj) * e(c) + aq(c) * (alpha_j(c) - beta_q)) / den_q;
    drift_i(c) = (eps * D / M - (1.0 + mi) * e(c)) / (eps * D);
    drift_j(c) = ((1.0 + mj) * e(c) - eps * D / M) / (-eps * D);
  }
  w.overrides.push_back({i, j, drift_i});
  w.overrides.push_back({j, i, drift_j});
  return w;
}

absl::StatusOr<ConsensusTrace> ReplayWitness(const EquivalenceWitness& witness,
                                             const ConsensusTrace& original) {
  ConsensusTrace out;
  out.t = original.t;
  out.epsilon = original.epsilon;
  out.mode = original.mode;
  out.client_ids = original.client_ids;
  out.initial = witness.initial;
  out.round0_overrides = witness.overrides;
  if (auto s = RunFrom(MakeRoundState(witness.initial, original.t), original,
                       witness.round0, witness.overrides, &out);
      !s.ok()) {
    return s;
  }
  return out;
}

ReplayReport ReplayAndCompare(const EquivalenceWitness& witness,
                              const ConsensusTrace& original,
                              const AdversaryView& original_view,
                              double tol) {
  ReplayReport report;
  auto replay = ReplayWitness(witness, original);
  if (!replay.ok()) {
    report.max_deviation = kInf;
    report.location = std::string(replay.status().message());
    return report;
  }
  auto view = RecordView(*replay, original_view.corrupted);
  if (!view.ok()) {
    report.max_deviation = kInf;
    report.location = std::string(view.status().message());
    return report;
  }
  // Overridden drift weights belong to the honest pair, so they never enter
  // the view; corrupted records carry the common 1/M.
  const ViewDiff diff = CompareViews(original_view, *view);
  report.max_deviation = diff.max_deviation;
  report.location = diff.location;
  report.pass = diff.max_deviation <= tol;
  return report;
}

std::string WitnessParamName(WitnessParam p) {
  switch (p) {
    case WitnessParam::kBetaP:
      return "beta_p";
    case WitnessParam::kBetaQ:
      return "beta_q";
    case WitnessParam::kWeightP:
      return "a_p";
    case WitnessParam::kWeightQ:
      return "a_q";
    case WitnessParam::kDriftI:
      return "alpha_i";
    case WitnessParam::kDriftJ:
      return "alpha_j";
  }
  return "unknown";
}

namespace {

// Works for const and mutable witnesses.
template <typename W>
auto& ParamRef(W& w, WitnessParam param, int coord) {
  switch (param) {
    case WitnessParam::kBetaP:
      return w.initial[w.i].invisible[w.p](coord);
    case WitnessParam::kBetaQ:
      return w.initial[w.j].invisible[w.q](coord);
    case WitnessParam::kWeightP:
      return w.round0[w.i][w.p](coord);
    case WitnessParam::kWeightQ:
      return w.round0[w.j][w.q](coord);
    case WitnessParam::kDriftI:
      return w.overrides[0].weight(coord);
    case WitnessParam::kDriftJ:
      break;
  }
  return w.overrides[1].weight(coord);
}

}  // namespace

double WitnessParamValue(const EquivalenceWitness& witness,
                         WitnessParam param, int coord) {
  return ParamRef(witness, param, coord);
}

EquivalenceWitness MutateWitness(const EquivalenceWitness& witness,
                                 WitnessParam param, int coord, double delta) {
  EquivalenceWitness w = witness;
  ParamRef(w, param, coord) += delta;
  return w;
}

double MutationDelta(const EquivalenceWitness& witness, double epsilon,
                     WitnessParam param, int coord) {
  const double v = WitnessParamValue(witness, param, coord);
  const auto& init = witness.initial;
  double g = 1.0;
  switch (param) {
    case WitnessParam::kBetaP:
    case WitnessParam::kBetaQ:
      break;
    case WitnessParam::kWeightP:
      g = init[witness.i].invisible[witness.p](coord) -
          init[witness.i].visible(coord);
      break;
    case WitnessParam::kWeightQ:
      g = init[witness.j].invisible[witness.q](coord) -
          init[witness.j].visible(coord);
      break;
    case WitnessParam::kDriftI:
    case WitnessParam::kDriftJ: {
      const DriftOverride& o =
          witness.overrides[param == WitnessParam::kDriftI ? 0 : 1];
      g = epsilon *
          (init[o.partner].visible(coord) - init[o.client].visible(coord));
      break;
    }
  }
  if (std::abs(g) < 1e-12) return 0.0;
  return 0.5 * std::max(1.0, std::abs(v * g)) / std::abs(g);
}

absl::StatusOr<ModelVec> ZInferenceAttack(const AdversaryView& view,
                                          int client, int assumed_m) {
  if (view.rounds.size() < 2) {
    return absl::InvalidArgumentError("attack needs at least one round");
  }
  if (assumed_m < 0) return absl::InvalidArgumentError("assumed m < 0");
  const int K = static_cast<int>(view.rounds.size()) - 1;
  if (client < 0 ||
      client >= static_cast<int>(view.rounds.front().visible.size())) {
    return absl::InvalidArgumentError("no such client slot");
  }
  ModelVec drift = ModelVec::Zero(view.rounds.front().global.size());
  for (int k = 0; k < K; ++k) {
    drift += view.rounds[k].global - view.rounds[k].visible[client];
  }
  const double scale = 1.0 + assumed_m;
  const ModelVec z0 =
      scale * view.rounds[K].visible[client] - view.epsilon * drift;
  return ModelVec(z0 / scale);
}

absl::StatusOr<ConsensusTrace> ConstructHiddenMPartner(
    const ConsensusTrace& trace, int client, int new_m, Rng& rng) {
  if (trace.mode != ConsensusMode::kMsp || trace.initial.empty() ||
      trace.rounds.size() < 2) {
    return absl::InvalidArgumentError("need a recorded MSP trace");
  }
  const int M = static_cast<int>(trace.initial.size());
  if (client < 0 || client >= M) {
    return absl::InvalidArgumentError("no such client slot");
  }
  if (new_m < 1) return absl::InvalidArgumentError("new_m must be >= 1");
  const SplitState& orig = trace.initial[client];
  const ModelVec& alpha0 = orig.visible;
  const double m = orig.m();
  const ModelVec local =
      alpha0 + (1.0 + m) / (1.0 + new_m) * (orig.origin - alpha0);

  ConsensusTrace out;
  out.t = trace.t;
  out.epsilon = trace.epsilon;
  out.mode = trace.mode;
  out.client_ids = trace.client_ids;
  out.initial = trace.initial;
  out.initial[client] = SplitWithVisible(local, alpha0, new_m, rng);
  out.round0_overrides = trace.round0_overrides;

  RoundState state = MakeRoundState(out.initial, trace.t);
  const int K = static_cast<int>(trace.rounds.size()) - 1;
  const int d = static_cast<int>(alpha0.size());
  out.rounds.push_back(SnapshotRound(state));
  for (int k = 0; k < K; ++k) {
    const TraceRound& r = trace.rounds[k];
    const ModelVec& alpha = r.visible[client];
    ModelVec target = ModelVec::Zero(d);
    for (size_t n = 0; n < r.invisible[client].size(); ++n) {
      target.array() += r.weights[client][n].array() *
                        (r.invisible[client][n] - alpha).array();
    }
    ModelVec spread = ModelVec::Zero(d);
    for (const auto& b : state.clients[client].invisible) spread += b - alpha;
    ModelVec a = ModelVec::Zero(d);
    for (int c = 0; c < d; ++c) {
      if (target(c) == 0.0) continue;
      if (std::abs(spread(c)) < kDegenerate) {
        return absl::FailedPreconditionError(
            absl::StrCat("degenerate partner weight at k=", k, " coord ", c));
      }
      a(c) = target(c) / spread(c);
    }
    WeightTable w = r.weights;
    w[client].assign(new_m, a);
    MspRound(state, trace.epsilon, w,
             k == 0 ? std::span<const DriftOverride>(trace.round0_overrides)
                    : std::span<const DriftOverride>{});
    out.rounds.back().weights = std::move(w);
    out.rounds.push_back(SnapshotRound(state));
  }
  return out;
}

absl::StatusOr<WitnessAuditReport> RunWitnessAudit(
    std::span<const ConsensusTrace> traces,
    const WitnessAuditOptions& options) {
  if (traces.empty() || options.magnitudes.empty()) {
    return absl::InvalidArgumentError("audit needs traces and magnitudes");
  }
  WitnessAuditReport report;
  report.all_pass = true;
  Rng rng = MakeRng(options.seed, Purpose::kAudit);
  std::normal_distribution<double> normal;
  for (int n = 0; n < options.tuples; ++n) {
    WitnessAuditCase c;
    c.magnitude = options.magnitudes[n % options.magnitudes.size()];
    absl::StatusOr<EquivalenceWitness> witness;
    const ConsensusTrace* trace = nullptr;
    for (;; ++c.redraws) {
      if (c.redraws > options.max_redraws) {
        return absl::FailedPreconditionError(
            "no nondegenerate witness after redraws");
      }
      c.trace_index =
          std::uniform_int_distribution<int>(0, traces.size() - 1)(rng);
      trace = &traces[c.trace_index];
      const int M = static_cast<int>(trace->initial.size());
      if (M < 2) return absl::InvalidArgumentError("trace needs M >= 2");
      c.i = std::uniform_int_distribution<int>(0, M - 1)(rng);
      c.j = std::uniform_int_distribution<int>(0, M - 2)(rng);
      if (c.j >= c.i) ++c.j;
      ModelVec e(trace->initial.front().visible.size());
      for (auto& x : e) x = normal(rng);
      e *= c.magnitude / e.norm();
      witness = ConstructWitness(*trace, c.i, c.j, e);
      if (witness.ok()) break;
      if (witness.status().code() != absl::StatusCode::kFailedPrecondition) {
        return witness.status();
      }
    }
    // Rotate through the empty, maximal and a random admissible coalition.
    const int M = static_cast<int>(trace->initial.size());
    std::set<int> corrupted;
    for (int s = 0; s < M; ++s) {
      if (s == c.i || s == c.j) continue;
      if (n % 3 == 1 || (n % 3 == 2 && Uniform01(rng) < 0.5)) {
        corrupted.insert(s);
      }
    }
    c.corrupted.assign(corrupted.begin(), corrupted.end());
    auto view = RecordView(*trace, corrupted, {c.i, c.j});
    if (!view.ok()) return view.status();

    EquivalenceWitness replayed = *witness;
    if (options.mutate) {
      replayed = MutateWitness(
          *witness, WitnessParam::kBetaP, 0,
          MutationDelta(*witness, trace->epsilon, WitnessParam::kBetaP, 0));
    }
    const ReplayReport rr =
        ReplayAndCompare(replayed, *trace, *view, options.tol);
    c.replay_deviation = rr.max_deviation;
    c.replay_location = rr.location;
    c.replay_pass = rr.pass;

    c.min_mutation_deviation = kInf;
    const int d = static_cast<int>(witness->e.size());
    for (WitnessParam param : kAllWitnessParams) {
      for (int coord = 0; coord < d; ++coord) {
        const double delta =
            MutationDelta(*witness, trace->epsilon, param, coord);
        if (delta == 0.0) continue;
        const ReplayReport mr = ReplayAndCompare(
            MutateWitness(*witness, param, coord, delta), *trace, *view,
            options.tol);
        if (mr.max_deviation < c.min_mutation_deviation) {
          c.min_mutation_deviation = mr.max_deviation;
          c.weakest_mutation =
              absl::StrCat(WitnessParamName(param), "[", coord, "]");
        }
      }
    }
    c.mutations_detected =
        c.min_mutation_deviation > options.mutation_threshold;
    report.all_pass = report.all_pass && c.replay_pass && c.mutations_detected;
    report.cases.push_back(std::move(c));
  }
  return report;
}

absl::StatusOr<DpAuditRow> QuantizerDpAudit(const DpAuditCase& c, int grid) {
  if (!(c.width > 0.0) || c.levels < 2 || c.bits < BitsForLevels(c.levels) ||
      !(c.c4 >= 0.0) || grid < 2) {
    return absl::InvalidArgumentError("invalid DP audit case");
  }
  auto qs = MakeQuantizerState(ModelVec::Constant(1, c.lo),
                               ModelVec::Constant(1, c.lo + c.width), c.levels);
  if (!qs.ok()) return qs.status();
  const double lo = c.lo;
  const double hi = qs->hi(0);
  auto inside = [&](double x) { return x >= lo && x <= hi; };
  // Grid points and knobs can round one ulp past hi.
  auto clamp = [&](double x) { return std::clamp(x, lo, hi); };

  std::vector<double> knobs;
  for (int tau = 0; tau < c.levels; ++tau) {
    knobs.push_back(clamp(qs->Knob(0, tau)));
  }
  std::vector<double> xs;
  for (int g = 0; g < grid; ++g) {
    xs.push_back(clamp(lo + (hi - lo) * g / (grid - 1)));
  }
  for (double k : knobs) {
    for (double x : {k, k - c.c4, k + c.c4}) {
      if (inside(x)) xs.push_back(x);
    }
  }

  DpAuditRow row;
  row.config = c;
  row.delta_formula = DpDelta(c.c4, c.width, 1.0, c.levels, c.bits);
  for (double x : xs) {
    auto px = CoordinateOutput(*qs, 0, x);
    if (!px.ok()) return px.status();
    std::vector<double> ys = {clamp(x - c.c4), clamp(x + c.c4)};
    for (double k : knobs) {
      if (std::abs(k - x) <= c.c4) ys.push_back(k);
    }
    for (double y : ys) {
      auto py = CoordinateOutput(*qs, 0, y);
      if (!py.ok()) return py.status();
      row.delta_measured =
          std::max(row.delta_measured, TotalVariation(*px, *py));
    }
  }
  row.ok = row.delta_measured <= row.delta_formula + 1e-12;
  return row;
}

}  // namespace fedsplit
