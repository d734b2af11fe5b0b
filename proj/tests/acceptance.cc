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

// Acceptance harness: one PASS/FAIL line per criterion.
//
// Criteria listed in kKnownFailures fail for a documented reason (see
// README.md). They still run and print FAIL; the exit status is nonzero only
// if some other criterion fails or a known failure starts passing.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fedsplit/cli_commands.h"
#include "fedsplit/consensus.h"
#include "fedsplit/orchestrator.h"
#include "fedsplit/privacy_audit.h"
#include "fedsplit/quantizer.h"
#include "fedsplit/spectral.h"
#include "fedsplit/splitting.h"
#include "json.hpp"

namespace fedsplit {
namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

const std::map<int, std::string> kKnownFailures = {
    {10, "the (l-1)/(2^B-1) branch is below 1 when l < 2^B, but inputs one "
         "knob spacing apart have disjoint output laws (TV = 1)"},
};

std::string Fmt(double x) { return absl::StrFormat("%.3g", x); }

#define CHECK_OK_OR_FAIL(expr)                                   \
  do {                                                           \
    const auto& _s = (expr);                                     \
    if (!_s.ok()) return Verdict{false, std::string(_s.message())}; \
  } while (0)

template <typename T>
const absl::Status& StatusOf(const absl::StatusOr<T>& s) {
  return s.status();
}
const absl::Status& StatusOf(const absl::Status& s) { return s; }

#define REQUIRE(expr) CHECK_OK_OR_FAIL(StatusOf(expr))

std::vector<SplitState> RandomClients(int M, int d, int m, double scale,
                                      Rng& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<SplitState> out;
  for (int i = 0; i < M; ++i) {
    ModelVec w(d);
    for (auto& v : w) v = normal(rng);
    out.push_back(*SplitModel(w, SplitRule{UniformSplit{0.3}, m}, rng));
  }
  return out;
}

// Desk experiment shared by criteria 6, 7 and 11.
struct Desk {
  ExperimentConfig cfg;
  std::vector<QuadraticClientLoss> losses;
  std::vector<uint64_t> seeds;
  std::map<std::string, std::vector<RunResult>> runs;
};

absl::Status LoadDesk(Desk* desk) {
  auto cfg = LoadExperimentConfig(std::string(FEDSPLIT_SOURCE_DIR) +
                                  "/configs/desk.json");
  if (!cfg.ok()) return cfg.status();
  desk->cfg = *std::move(cfg);
  auto losses = BuildProblem(desk->cfg.problem);
  if (!losses.ok()) return losses.status();
  desk->losses = *std::move(losses);
  desk->cfg.fl.N = static_cast<int>(desk->losses.size());
  for (uint64_t s = 0; s < 20; ++s) desk->seeds.push_back(s);
  return absl::OkStatus();
}

FLConfig DeskConfig(const Desk& desk, Algorithm mode, int bits) {
  FLConfig c = desk.cfg.fl;
  c.mode = mode;
  c.bits = bits;
  c.levels = 0;
  return c;
}

absl::StatusOr<const std::vector<RunResult>*> DeskRuns(Desk& desk,
                                                       Algorithm mode,
                                                       int bits) {
  const std::string key = absl::StrCat(AlgorithmName(mode), bits);
  if (auto it = desk.runs.find(key); it != desk.runs.end()) return &it->second;
  const FLConfig c = DeskConfig(desk, mode, bits);
  if (auto s = ValidateConfig(c, desk.losses); !s.ok()) return s;
  auto r = RunSeeds(c, desk.losses, desk.seeds);
  if (!r.ok()) return r.status();
  return &(desk.runs[key] = *std::move(r));
}

std::vector<double> MeanOver(const std::vector<RunResult>& runs,
                             double RoundMetrics::*field) {
  std::vector<double> mean(runs.front().rounds.size(), 0.0);
  for (const auto& r : runs) {
    for (size_t t = 0; t < mean.size(); ++t) mean[t] += r.rounds[t].*field;
  }
  for (auto& v : mean) v /= runs.size();
  return mean;
}

Verdict Conservation() {
  Rng rng(1);
  std::uniform_int_distribution<int> pick_M(2, 16), pick_m(1, 4),
      pick_d(1, 32), pick_K(1, 200);
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const int M = pick_M(rng), m = pick_m(rng), d = pick_d(rng);
    const double eps = 0.05 + 0.9 * Uniform01(rng);
    const double gamma = 0.99 * StepWeightBound(1.0 - eps) * Uniform01(rng);
    const auto w = StepWeights::Uniform(
        n % 2 ? StepWeights::Rule::kHarmonic : StepWeights::Rule::kConstant,
        M, gamma, m);
    ConsensusOptions o;
    o.K = pick_K(rng);
    o.epsilon = eps;
    o.weights = &w;
    auto r = RunConsensus(MakeRoundState(RandomClients(M, d, m, 5.0, rng)), o);
    REQUIRE(r);
    worst = std::max(worst, r->diag.conservation_drift);
  }
  return {worst <= 1e-9,
          absl::StrCat("max relative drift ", Fmt(worst), " over 100 configs")};
}

// The limit is asymptotic. Instances whose transition matrix has a second
// eigenvalue modulus r with r^300 > 1e-9 cannot settle in 300 rounds; they
// are redrawn and counted.
Verdict ConsensusLimitCheck() {
  Rng rng(2);
  double worst = 0.0;
  int redrawn = 0;
  for (int n = 0; n < 20;) {
    const int M = 2 + static_cast<int>(Uniform01(rng) * 7);
    const int m = 1 + static_cast<int>(Uniform01(rng) * 3);
    const int d = 1 + static_cast<int>(Uniform01(rng) * 5);
    const double eps = 0.3 + 0.6 * Uniform01(rng);
    const double share = 0.3 + 0.65 * Uniform01(rng);
    const auto w = StepWeights::Uniform(StepWeights::Rule::kConstant, M,
                                        share * StepWeightBound(1.0 - eps), m);
    auto u = BuildU(M, eps);
    REQUIRE(u);
    auto p = BuildPFromSchedule(*u, w, 0);
    REQUIRE(p);
    std::vector<double> mods;
    for (double e : SymmetricEigenvalues(*p)) mods.push_back(std::abs(e));
    std::sort(mods.rbegin(), mods.rend());
    if (std::pow(mods[1], 300) > 1e-9) {
      ++redrawn;
      continue;
    }
    ++n;
    const RoundState s0 = MakeRoundState(RandomClients(M, d, m, 1.0, rng));
    const ModelVec limit = ConsensusLimit(s0);
    ConsensusOptions o;
    o.K = 300;
    o.epsilon = eps;
    o.weights = &w;
    auto r = RunConsensus(s0, o);
    REQUIRE(r);
    for (const auto& c : r->final_state.clients) {
      worst = std::max(worst, (c.visible - limit).cwiseAbs().maxCoeff());
      for (const auto& b : c.invisible) {
        worst = std::max(worst, (b - limit).cwiseAbs().maxCoeff());
      }
    }
  }
  return {worst <= 1e-6,
          absl::StrCat("max submodel distance to limit ", Fmt(worst),
                       " on 20 instances (", redrawn,
                       " slow-mixing draws redrawn)")};
}

Verdict QuantizerExactness() {
  auto qs = MakeQuantizerState(ModelVec::Constant(1, -1.0),
                               ModelVec::Constant(1, 2.0), 13);
  REQUIRE(qs);
  const double spacing = 3.0 / 12.0;
  double prob_err = 0.0, var_excess = -1e300, worst_z = 0.0;
  for (int g = 0; g < 1000; ++g) {
    const double x = -1.0 + 3.0 * g / 999.0;
    auto law = CoordinateOutput(*qs, 0, x);
    REQUIRE(law);
    const int tau = std::min(static_cast<int>(std::floor((x + 1.0) / spacing)), 11);
    const double lower = -1.0 + tau * spacing;
    const double up = (x - lower) / spacing;
    double mean = 0.0, second = 0.0;
    for (const auto& a : law->atoms) {
      const double expect = a.index == static_cast<uint32_t>(tau) ? 1.0 - up : up;
      prob_err = std::max(prob_err, std::abs(a.prob - expect));
      mean += a.prob * a.value;
      second += a.prob * a.value * a.value;
    }
    var_excess = std::max(var_excess,
                          second - mean * mean - spacing * spacing / 4.0);
  }
  SplitMix64 rng(3);
  for (double x : {-0.93, 0.3, 1.61}) {
    ModelVec w = ModelVec::Constant(1, x);
    constexpr int kDraws = 100000;
    double sum = 0.0, sq = 0.0;
    for (int s = 0; s < kDraws; ++s) {
      auto q = Quantize(w, *qs, rng);
      REQUIRE(q);
      const double v = Dequantize(*q, *qs)(0);
      sum += v;
      sq += v * v;
    }
    const double mean = sum / kDraws;
    const double sd = std::sqrt(std::max(sq / kDraws - mean * mean, 1e-300));
    worst_z = std::max(worst_z, std::abs(mean - x) / (sd / std::sqrt(1.0 * kDraws)));
  }
  const bool ok = prob_err <= 1e-15 && var_excess <= 1e-15 && worst_z <= 4.0;
  return {ok, absl::StrCat("probability error ", Fmt(prob_err),
                           ", variance minus bound ", Fmt(var_excess),
                           ", Monte-Carlo |z| ", Fmt(worst_z))};
}

Verdict IntervalSweep(Desk& desk, bool delta_check) {
  static int interval = -1, delta = -1;
  static double ratio = 0.0;
  if (interval < 0) {
    interval = delta = 0;
    for (int n = 0; n < 50; ++n) {
      FLConfig c = DeskConfig(desk, Algorithm::kMspdq, 4 + 2 * (n % 3));
      c.T = 100;
      c.seed = 100 + n;
      c.strict_intervals = false;
      auto r = RunMspdqFl(c, desk.losses);
      REQUIRE(r);
      interval += r->interval_violations;
      delta += r->delta_violations;
      ratio = std::max(ratio, r->max_delta_ratio);
    }
  }
  if (!delta_check) {
    return {interval == 0,
            absl::StrCat(interval, " interval violations in 50 runs")};
  }
  return {delta == 0, absl::StrCat(delta, " error-bound violations, max ",
                                   "||Delta|| / bound ", Fmt(ratio))};
}

Verdict ConvergenceRate(Desk& desk) {
  auto msp = DeskRuns(desk, Algorithm::kMsp, desk.cfg.fl.bits);
  REQUIRE(msp);
  auto q8 = DeskRuns(desk, Algorithm::kMspdq, 8);
  REQUIRE(q8);
  bool ok = true;
  std::string detail;
  for (const auto& [name, runs, quantized] :
       {std::tuple{"MSP", *msp, false}, std::tuple{"MSPDQ(B=8)", *q8, true}}) {
    const auto gap = MeanOver(*runs, &RoundMetrics::gap);
    const double slope = LogLogSlope(gap, 50, 500);
    double pi = 0.0;
    for (const auto& r : *runs) pi = std::max(pi, r.pi_max);
    auto tc = ComputeTheoremConstants(
        DeskConfig(desk, quantized ? Algorithm::kMspdq : Algorithm::kMsp, 8),
        desk.losses, pi);
    REQUIRE(tc);
    int above = 0;
    double tightest = 0.0;
    for (size_t t = 1; t <= gap.size(); ++t) {
      const double b = tc->BoundCurve(static_cast<int>(t), quantized);
      if (gap[t - 1] > b) ++above;
      tightest = std::max(tightest, gap[t - 1] / b);
    }
    ok = ok && slope >= -1.3 && slope <= -0.7 && above == 0;
    absl::StrAppend(&detail, detail.empty() ? "" : "; ", name, " slope ",
                    Fmt(slope), ", gap above bound at ", above,
                    " rounds (max gap/bound ", Fmt(tightest), ")");
  }
  return {ok, detail};
}

Verdict BitsOrdering(Desk& desk) {
  auto msp = DeskRuns(desk, Algorithm::kMsp, desk.cfg.fl.bits);
  REQUIRE(msp);
  const double msp_final = MeanOver(**msp, &RoundMetrics::gap).back();
  std::vector<double> finals;
  std::string detail;
  for (int bits : {4, 6, 8, 12}) {
    auto r = DeskRuns(desk, Algorithm::kMspdq, bits);
    REQUIRE(r);
    finals.push_back(MeanOver(**r, &RoundMetrics::gap).back());
    absl::StrAppend(&detail, "B=", bits, " ", Fmt(finals.back()), ", ");
  }
  bool monotone = true;
  for (size_t i = 1; i < finals.size(); ++i) {
    monotone = monotone && finals[i] <= finals[i - 1];
  }
  const double rel = std::abs(finals.back() - msp_final) / msp_final;
  absl::StrAppend(&detail, "MSP ", Fmt(msp_final), "; B=12 vs MSP ",
                  Fmt(100.0 * rel), "%");
  return {monotone && rel <= 0.10, detail};
}

Verdict CommAccounting(Desk& desk) {
  bool exact = true;
  std::string detail;
  bool within = true;
  for (const auto& [name, mode] : {std::pair{"MSP", Algorithm::kMsp},
                                   std::pair{"MSPDQ", Algorithm::kMspdq}}) {
    auto runs = DeskRuns(desk, mode, 8);
    REQUIRE(runs);
    uint64_t expect = 0;
    for (const auto& r : **runs) {
      uint64_t e = 0;
      for (const auto& m : r.rounds) e += desk.cfg.fl.M * (m.K + 1ull);
      exact = exact && CommCounter(r.rounds) == e;
      expect = e;
    }
    double pi = 0.0;
    for (const auto& r : **runs) pi = std::max(pi, r.pi_max);
    auto tc = ComputeTheoremConstants(DeskConfig(desk, mode, 8), desk.losses,
                                      pi);
    REQUIRE(tc);
    const auto dist2 = MeanOver(**runs, &RoundMetrics::dist2);
    std::vector<uint64_t> uploads;
    for (const auto& m : (**runs)[0].rounds) uploads.push_back(m.uploads);
    for (double rho : {1e-1, 1e-2}) {
      const auto got = UploadsToReach(dist2, uploads, rho, tc->dist0_sq);
      const double bound = CommComplexityBound(rho, *tc);
      within = within && got.has_value() && *got <= bound;
      absl::StrAppend(&detail, name, " rho=", Fmt(rho), ": ",
                      got ? absl::StrCat(*got) : "never", " <= ",
                      Fmt(bound), "; ");
    }
    absl::StrAppend(&detail, name, " uploads per run ", expect, "; ");
  }
  return {exact && within,
          absl::StrCat(exact ? "counts exact; " : "count mismatch; ", detail)};
}

absl::StatusOr<std::vector<ConsensusTrace>> DeskTraces(const Desk& desk,
                                                       int T, int fixed_K) {
  FLConfig c = DeskConfig(desk, Algorithm::kMsp, 8);
  c.T = T;
  c.fixed_K = fixed_K;
  for (int t = 1; t <= T; ++t) c.trace_rounds.insert(t);
  auto r = RunMspFl(c, desk.losses);
  if (!r.ok()) return r.status();
  return r->traces;
}

Verdict WitnessSoundness(const Desk& desk) {
  auto traces = DeskTraces(desk, 3, 0);
  REQUIRE(traces);
  WitnessAuditOptions o;
  o.tuples = 50;
  auto report = RunWitnessAudit(*traces, o);
  REQUIRE(report);
  double worst_replay = 0.0, weakest = 1e300;
  int replay_fail = 0, mutation_miss = 0;
  std::string weakest_name;
  for (const auto& c : report->cases) {
    worst_replay = std::max(worst_replay, c.replay_deviation);
    if (c.min_mutation_deviation < weakest) {
      weakest = c.min_mutation_deviation;
      weakest_name = c.weakest_mutation;
    }
    replay_fail += !c.replay_pass;
    mutation_miss += !c.mutations_detected;
  }
  return {report->all_pass && report->cases.size() == 50,
          absl::StrCat(report->cases.size(), " tuples, max replay deviation ",
                       Fmt(worst_replay), " (", replay_fail,
                       " fail), min mutation deviation ", Fmt(weakest), " at ",
                       weakest_name, " (",
                       mutation_miss, " undetected)")};
}

Verdict Identifiability(const Desk& desk) {
  auto traces = DeskTraces(desk, 1, 200);
  REQUIRE(traces);
  const ConsensusTrace& trace = traces->front();
  auto view = RecordView(trace, {});
  REQUIRE(view);
  double worst_rel = 0.0;
  for (size_t i = 0; i < trace.initial.size(); ++i) {
    auto est = ZInferenceAttack(*view, static_cast<int>(i),
                                trace.initial[i].m());
    REQUIRE(est);
    const ModelVec& truth = trace.initial[i].origin;
    worst_rel = std::max(worst_rel, (*est - truth).norm() / truth.norm());
  }
  Rng rng(9);
  double view_dev = 0.0, attack_dev = 0.0;
  for (int client = 0; client < 3; ++client) {
    auto partner = ConstructHiddenMPartner(trace, client, 2 + client, rng);
    REQUIRE(partner);
    auto pv = RecordView(*partner, {}, {client});
    REQUIRE(pv);
    view_dev = std::max(view_dev, CompareViews(*view, *pv).max_deviation);
    for (int m : {1, 2, 3}) {
      auto a = ZInferenceAttack(*view, client, m);
      auto b = ZInferenceAttack(*pv, client, m);
      REQUIRE(a);
      REQUIRE(b);
      attack_dev = std::max(attack_dev, (*a - *b).cwiseAbs().maxCoeff());
    }
  }
  const bool ok = worst_rel <= 1e-3 && view_dev <= 1e-9 && attack_dev <= 1e-9;
  return {ok, absl::StrCat("z-attack relative error ", Fmt(worst_rel),
                           "; paired traces: view deviation ", Fmt(view_dev),
                           ", attack output deviation ", Fmt(attack_dev))};
}

Verdict QuantizerDp() {
  Rng rng(10);
  std::uniform_int_distribution<int> pick_bits(1, 8);
  int violations = 0, first_branch = 0, first_branch_violations = 0;
  double worst = 0.0;
  std::string example;
  for (int n = 0; n < 200; ++n) {
    const int bits = pick_bits(rng);
    const int top = 1 << bits;
    const int levels =
        std::max(2, (top >> 1) + 1 +
                        static_cast<int>(Uniform01(rng) * ((top >> 1))));
    const double width = std::exp(std::log(0.01) + Uniform01(rng) *
                                                       std::log(1e4));
    const double c4 = width * std::exp(std::log(1e-4) + Uniform01(rng) *
                                                            std::log(1e4));
    const double lo = -10.0 + 20.0 * Uniform01(rng);
    auto row = QuantizerDpAudit({c4, std::min(levels, top), bits, lo, width});
    REQUIRE(row);
    const double first = c4 * (row->config.levels - 1) / width;
    const bool first_binds = first <= row->delta_formula;
    first_branch += first_binds;
    if (!row->ok) {
      first_branch_violations += first_binds;
      if (violations == 0) {
        example = absl::StrCat(" e.g. C4/width=", Fmt(c4 / width), " l=",
                               row->config.levels, " B=", bits, ": TV ",
                               Fmt(row->delta_measured), " > delta ",
                               Fmt(row->delta_formula));
      }
      ++violations;
      worst = std::max(worst, row->delta_measured - row->delta_formula);
    }
  }
  return {violations == 0,
          absl::StrCat(violations, "/200 configs exceed delta (worst excess ",
                       Fmt(worst), "; first branch binding in ", first_branch, " with ",
                       first_branch_violations, " violations)", example)};
}

Verdict DegenerateReductions(const Desk& desk) {
  FLConfig c = DeskConfig(desk, Algorithm::kMsp, 8);
  c.T = 100;
  c.split = SplitRule{UniformSplit{0.3, true}, 1};
  c.gamma = 0.0;
  c.fixed_K = 1;
  auto msp = RunMspFl(c, desk.losses);
  REQUIRE(msp);
  auto avg = RunFedAvg(c, desk.losses);
  REQUIRE(avg);
  double worst = (msp->final_model - avg->final_model).cwiseAbs().maxCoeff();
  for (size_t t = 0; t < msp->rounds.size(); ++t) {
    worst = std::max(worst, std::abs(std::sqrt(msp->rounds[t].dist2) -
                                     std::sqrt(avg->rounds[t].dist2)));
  }
  c.ldp_scale = 0.0;
  auto ldp = RunLdp(c, desk.losses);
  REQUIRE(ldp);
  const double ldp_diff =
      (ldp->final_model - avg->final_model).cwiseAbs().maxCoeff();
  return {worst <= 1e-12 && ldp_diff == 0.0,
          absl::StrCat("MSP vs FedAvg max trajectory difference ", Fmt(worst),
                       "; LDP(0) vs FedAvg ", Fmt(ldp_diff))};
}

std::vector<uint8_t> FromHex(const std::string& hex) {
  std::vector<uint8_t> out;
  for (size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

Verdict Codec() {
  Rng rng(13);
  int mismatches = 0;
  for (int n = 0; n < 10000; ++n) {
    const int d = 1 + n % 23;
    const int levels = 2 + static_cast<int>(Uniform01(rng) * 70000);
    ModelVec lo(d), hi(d);
    for (int j = 0; j < d; ++j) {
      lo(j) = -100.0 * Uniform01(rng);
      hi(j) = lo(j) + 1e-3 + 10.0 * Uniform01(rng);
    }
    auto qs = MakeQuantizerState(lo, hi, levels);
    REQUIRE(qs);
    std::uniform_int_distribution<uint32_t> idx(0, levels - 1);
    QuantizedVector q;
    for (int j = 0; j < d; ++j) q.indices.push_back(idx(rng));
    auto back = DecodeStandalone(Encode(q, *qs));
    if (!back.ok() || back->second.indices != q.indices ||
        back->first.lo != qs->lo || back->first.hi != qs->hi) {
      ++mismatches;
    }
  }
  std::ifstream in(std::string(FEDSPLIT_FIXTURE_DIR) + "/quantizer.json");
  if (!in) return {false, "missing golden fixture"};
  const auto fx = nlohmann::json::parse(in);
  int golden = 0, golden_bad = 0;
  for (const auto& c : fx["codec"]) {
    const auto lo = c["lo"].get<std::vector<double>>();
    const auto hi = c["hi"].get<std::vector<double>>();
    auto qs = MakeQuantizerState(
        Eigen::Map<const ModelVec>(lo.data(), lo.size()),
        Eigen::Map<const ModelVec>(hi.data(), hi.size()), c["levels"]);
    REQUIRE(qs);
    const QuantizedVector q{c["indices"].get<std::vector<uint32_t>>()};
    ++golden;
    if (Encode(q, *qs) != FromHex(c["bytes_hex"])) ++golden_bad;
  }
  return {mismatches == 0 && golden_bad == 0 && golden > 0,
          absl::StrCat(mismatches, "/10000 roundtrip mismatches, ", golden_bad,
                       "/", golden, " golden fixtures differ")};
}

Verdict Spectral() {
  double worst = 0.0;
  for (int M : {2, 3, 4, 8, 16}) {
    for (int g = 1; g <= 20; ++g) {
      const double eps = g / 20.0;
      auto u = BuildU(M, eps);
      REQUIRE(u);
      worst = std::max({worst, std::abs(Lambda2(*u) - std::abs(1.0 - eps)),
                        std::abs(LambdaMin(*u) - (1.0 - eps))});
    }
  }
  Rng rng(14);
  int nonmonotone = 0;
  for (int n = 0; n < 20; ++n) {
    const int M = 2 + n % 6, m = 1 + n % 3;
    const double eps = 0.1 + 0.8 * Uniform01(rng);
    const auto w = StepWeights::Uniform(
        n % 2 ? StepWeights::Rule::kHarmonic : StepWeights::Rule::kConstant,
        M, 0.95 * StepWeightBound(1.0 - eps) * Uniform01(rng), m);
    auto probe = ProbeContraction(M, eps, w, 80, 0.99);
    REQUIRE(probe);
    for (size_t k = 1; k < probe->deviations.size(); ++k) {
      if (probe->deviations[k] > probe->deviations[k - 1] + 1e-15) {
        ++nonmonotone;
        break;
      }
    }
  }
  return {worst <= 1e-12 && nonmonotone == 0,
          absl::StrCat("max eigenvalue error ", Fmt(worst), "; ", nonmonotone,
                       "/20 schedules with increasing deviation")};
}

int Main(int argc, char** argv) {
  // Optional arguments select criteria by number.
  std::set<int> only;
  for (int a = 1; a < argc; ++a) only.insert(std::atoi(argv[a]));
  Desk desk;
  const absl::Status loaded = LoadDesk(&desk);
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Verdict()> run;
  };
  auto needs_desk = [&](std::function<Verdict()> f) {
    return [&loaded, f] {
      if (!loaded.ok()) return Verdict{false, std::string(loaded.message())};
      return f();
    };
  };
  const std::vector<Criterion> criteria = {
      {1, "conservation", 10, Conservation},
      {2, "consensus limit", 5, ConsensusLimitCheck},
      {3, "quantizer exactness", 30, QuantizerExactness},
      {4, "interval containment", 60,
       needs_desk([&] { return IntervalSweep(desk, false); })},
      {5, "quantization error bound", 60,
       needs_desk([&] { return IntervalSweep(desk, true); })},
      {6, "convergence rate", 300, needs_desk([&] { return ConvergenceRate(desk); })},
      {7, "bit-width ordering", 600, needs_desk([&] { return BitsOrdering(desk); })},
      {8, "witness soundness", 60, needs_desk([&] { return WitnessSoundness(desk); })},
      {9, "identifiability contrast", 10,
       needs_desk([&] { return Identifiability(desk); })},
      {10, "quantizer DP", 30, QuantizerDp},
      {11, "communication accounting", 300,
       needs_desk([&] { return CommAccounting(desk); })},
      {12, "degenerate reductions", 5,
       needs_desk([&] { return DegenerateReductions(desk); })},
      {13, "codec", 5, Codec},
      {14, "spectral oracles", 10, Spectral},
  };
  int unexpected = 0, passed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    ++ran;
    const auto start = Clock::now();
    Verdict v = c.run();
    const double secs =
        std::chrono::duration<double>(Clock::now() - start).count();
    if (secs > c.budget_s) {
      v.pass = false;
      absl::StrAppend(&v.detail, "; runtime ", Fmt(secs), " s over budget ",
                      c.budget_s, " s");
    }
    passed += v.pass;
    const auto known = kKnownFailures.find(c.id);
    std::string tag = v.pass ? "PASS" : "FAIL";
    if (known != kKnownFailures.end()) {
      if (v.pass) {
        ++unexpected;
        tag = "PASS (listed as a known failure; update the list)";
      } else {
        tag = "FAIL (known: " + known->second + ")";
      }
    } else if (!v.pass) {
      ++unexpected;
    }
    std::printf("criterion %2d %-26s %s | %s [%.1f s]\n", c.id, c.name,
                tag.c_str(), v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria pass, %d unexpected outcomes\n", passed, ran,
              unexpected);
  return unexpected == 0 ? 0 : 1;
}

}  // namespace
}  // namespace fedsplit

int main(int argc, char** argv) { return fedsplit::Main(argc, argv); }
