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

#include "fedsplit/cli_commands.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "absl/status/status.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "fedsplit/privacy_audit.h"

namespace fedsplit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kReachTargets[] = {1e-1, 1e-2};

absl::Status Invalid(absl::string_view msg) {
  return absl::InvalidArgumentError(msg);
}

absl::Status CheckKeys(const json& obj, const std::set<std::string>& allowed,
                       absl::string_view where) {
  if (!obj.is_object()) return Invalid(absl::StrCat(where, " must be an object"));
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.contains(k)) {
      return Invalid(absl::StrCat("unknown key '", k, "' in ", where));
    }
  }
  return absl::OkStatus();
}

template <typename T>
absl::Status Get(const json& obj, const std::string& key, T* out,
                 bool required) {
  if (!obj.contains(key)) {
    if (required) return Invalid(absl::StrCat("missing required key '", key, "'"));
    return absl::OkStatus();
  }
  const json& v = obj.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) return Invalid(absl::StrCat("'", key, "' must be a boolean"));
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) {
      return Invalid(absl::StrCat("'", key, "' must be an integer"));
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) return Invalid(absl::StrCat("'", key, "' must be a number"));
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) return Invalid(absl::StrCat("'", key, "' must be a string"));
  }
  *out = v.get<T>();
  return absl::OkStatus();
}

#define FEDSPLIT_RETURN_IF_ERROR(expr) \
  do {                                 \
    if (auto _s = (expr); !_s.ok()) {  \
      return _s;                       \
    }                                  \
  } while (0)

absl::StatusOr<SplitRule> ParseSplit(const json& s) {
  FEDSPLIT_RETURN_IF_ERROR(
      CheckKeys(s, {"rule", "eps_split", "midpoint", "scale", "m"}, "fl.split"));
  std::string rule;
  FEDSPLIT_RETURN_IF_ERROR(Get(s, "rule", &rule, true));
  SplitRule out;
  FEDSPLIT_RETURN_IF_ERROR(Get(s, "m", &out.m, false));
  if (rule == "uniform") {
    UniformSplit u;
    FEDSPLIT_RETURN_IF_ERROR(Get(s, "eps_split", &u.eps_split, true));
    FEDSPLIT_RETURN_IF_ERROR(Get(s, "midpoint", &u.midpoint, false));
    out.variant = u;
  } else if (rule == "laplace") {
    LaplaceSplit l;
    FEDSPLIT_RETURN_IF_ERROR(Get(s, "scale", &l.scale, true));
    out.variant = l;
  } else {
    return Invalid(absl::StrCat("unknown split rule '", rule, "'"));
  }
  return out;
}

absl::StatusOr<FLConfig> ParseFl(const json& f) {
  FEDSPLIT_RETURN_IF_ERROR(CheckKeys(
      f,
      {"mode", "clients_per_round", "local_steps", "rounds", "epsilon",
       "gamma", "gamma_per_client", "m_per_client", "msp_rule", "lambda",
       "bits", "levels", "split", "radius", "init_width", "w0", "ldp_scale",
       "fixed_K", "enforce_bit_budget", "strict_intervals", "probe_rounds",
       "trace_rounds", "seed"},
      "fl"));
  FLConfig c;
  std::string mode;
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "mode", &mode, true));
  auto m = ParseAlgorithm(mode);
  if (!m.ok()) return m.status();
  c.mode = *m;
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "clients_per_round", &c.M, true));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "local_steps", &c.E, false));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "rounds", &c.T, true));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "epsilon", &c.epsilon, true));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "gamma", &c.gamma, true));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "lambda", &c.lambda, true));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "bits", &c.bits, true));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "levels", &c.levels, false));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "radius", &c.radius, true));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "init_width", &c.init_width, false));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "w0", &c.w0, false));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "ldp_scale", &c.ldp_scale, false));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "fixed_K", &c.fixed_K, false));
  FEDSPLIT_RETURN_IF_ERROR(
      Get(f, "enforce_bit_budget", &c.enforce_bit_budget, false));
  FEDSPLIT_RETURN_IF_ERROR(
      Get(f, "strict_intervals", &c.strict_intervals, false));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "probe_rounds", &c.probe_rounds, false));
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "seed", &c.seed, false));
  if (f.contains("split")) {
    auto s = ParseSplit(f.at("split"));
    if (!s.ok()) return s.status();
    c.split = *s;
  } else if (c.mode == Algorithm::kMsp || c.mode == Algorithm::kMspdq) {
    return Invalid("missing required key 'split'");
  }
  std::string rule = "constant";
  FEDSPLIT_RETURN_IF_ERROR(Get(f, "msp_rule", &rule, false));
  if (rule == "constant") {
    c.msp_rule = StepWeights::Rule::kConstant;
  } else if (rule == "harmonic") {
    c.msp_rule = StepWeights::Rule::kHarmonic;
  } else {
    return Invalid(absl::StrCat("unknown msp_rule '", rule, "'"));
  }
  try {
    if (f.contains("gamma_per_client")) {
      c.gamma_per_client = f.at("gamma_per_client").get<std::vector<double>>();
    }
    if (f.contains("m_per_client")) {
      c.m_per_client = f.at("m_per_client").get<std::vector<int>>();
    }
    if (f.contains("trace_rounds")) {
      for (int t : f.at("trace_rounds").get<std::vector<int>>()) {
        c.trace_rounds.insert(t);
      }
    }
  } catch (const json::exception& e) {
    return Invalid(e.what());
  }
  return c;
}

absl::StatusOr<ProblemSpec> ParseProblem(const json& p,
                                         const std::string& base_dir) {
  FEDSPLIT_RETURN_IF_ERROR(CheckKeys(
      p,
      {"file", "clients", "dim", "spread", "gamma_het", "seed", "mu", "L",
       "center", "samples_per_client", "sample_noise", "batch_size"},
      "problem"));
  ProblemSpec s;
  if (p.contains("file")) {
    FEDSPLIT_RETURN_IF_ERROR(Get(p, "file", &s.file, true));
    if (fs::path(s.file).is_relative()) {
      s.file = (fs::path(base_dir) / s.file).string();
    }
    return s;
  }
  FEDSPLIT_RETURN_IF_ERROR(Get(p, "clients", &s.clients, true));
  FEDSPLIT_RETURN_IF_ERROR(Get(p, "dim", &s.dim, true));
  FEDSPLIT_RETURN_IF_ERROR(Get(p, "seed", &s.seed, false));
  ProblemOptions& o = s.options;
  FEDSPLIT_RETURN_IF_ERROR(Get(p, "mu", &o.mu, true));
  FEDSPLIT_RETURN_IF_ERROR(Get(p, "L", &o.L, true));
  FEDSPLIT_RETURN_IF_ERROR(Get(p, "center", &o.center, false));
  FEDSPLIT_RETURN_IF_ERROR(
      Get(p, "samples_per_client", &o.samples_per_client, false));
  FEDSPLIT_RETURN_IF_ERROR(Get(p, "sample_noise", &o.sample_noise, false));
  FEDSPLIT_RETURN_IF_ERROR(Get(p, "batch_size", &o.batch_size, false));
  if (p.contains("spread") == p.contains("gamma_het")) {
    return Invalid("problem needs exactly one of 'spread' and 'gamma_het'");
  }
  double v = 0.0;
  if (p.contains("spread")) {
    FEDSPLIT_RETURN_IF_ERROR(Get(p, "spread", &v, true));
    s.spread = v;
  } else {
    FEDSPLIT_RETURN_IF_ERROR(Get(p, "gamma_het", &v, true));
    s.gamma_het = v;
  }
  return s;
}

std::string Num(double x) { return absl::StrFormat("%.17g", x); }

json ProblemConstantsJson(const ProblemConstants& pc) {
  json j;
  j["mu"] = pc.mu;
  j["L"] = pc.L;
  j["gamma_het"] = pc.gamma_het;
  j["sigma"] = pc.sigma;
  j["G"] = pc.G;
  j["radius"] = pc.radius;
  j["w_max_norm"] = pc.w_max_norm;
  j["f_star"] = pc.f_star;
  j["w_star"] = std::vector<double>(pc.w_star.data(),
                                    pc.w_star.data() + pc.w_star.size());
  return j;
}

json TheoremJson(const TheoremConstants& c) {
  json j;
  j["mu"] = c.mu;
  j["L"] = c.L;
  j["E"] = c.E;
  j["M"] = c.M;
  j["dim"] = c.dim;
  j["bits"] = c.bits;
  j["vartheta"] = c.vartheta;
  j["C"] = c.C;
  j["lambda"] = c.lambda;
  j["contraction_rate"] = c.contraction_rate;
  j["w_max_norm"] = c.w_max_norm;
  j["pi_tilde"] = c.pi_tilde;
  j["gamma_max"] = c.gamma_max;
  j["D1"] = c.D1;
  j["D2"] = c.D2;
  j["D3"] = c.D3;
  j["nu1"] = c.nu1;
  j["nu2"] = c.nu2;
  j["dist0_sq"] = c.dist0_sq;
  return j;
}

TheoremConstants TheoremFromJson(const json& j) {
  TheoremConstants c;
  c.mu = j.at("mu");
  c.L = j.at("L");
  c.E = j.at("E");
  c.M = j.at("M");
  c.dim = j.at("dim");
  c.bits = j.at("bits");
  c.vartheta = j.at("vartheta");
  c.C = j.at("C");
  c.lambda = j.at("lambda");
  c.contraction_rate = j.at("contraction_rate");
  c.w_max_norm = j.at("w_max_norm");
  c.pi_tilde = j.at("pi_tilde");
  c.gamma_max = j.at("gamma_max");
  c.D1 = j.at("D1");
  c.D2 = j.at("D2");
  c.D3 = j.at("D3");
  c.nu1 = j.at("nu1");
  c.nu2 = j.at("nu2");
  c.dist0_sq = j.at("dist0_sq");
  return c;
}

bool IsSplitMode(Algorithm a) {
  return a == Algorithm::kMsp || a == Algorithm::kMspdq;
}

struct SeriesStats {
  std::vector<double> mean_gap, std_gap, mean_dist2, mean_bits;
  std::vector<uint64_t> uploads;
};

SeriesStats Aggregate(const std::vector<std::vector<RoundMetrics>>& runs) {
  SeriesStats s;
  const size_t T = runs.front().size();
  const double n = static_cast<double>(runs.size());
  s.mean_gap.assign(T, 0.0);
  s.std_gap.assign(T, 0.0);
  s.mean_dist2.assign(T, 0.0);
  s.mean_bits.assign(T, 0.0);
  for (const auto& r : runs) {
    for (size_t t = 0; t < T; ++t) {
      s.mean_gap[t] += r[t].gap / n;
      s.mean_dist2[t] += r[t].dist2 / n;
      s.mean_bits[t] += static_cast<double>(r[t].bits) / n;
    }
  }
  for (const auto& r : runs) {
    for (size_t t = 0; t < T; ++t) {
      const double dv = r[t].gap - s.mean_gap[t];
      s.std_gap[t] += dv * dv / std::max(1.0, n - 1.0);
    }
  }
  for (double& v : s.std_gap) v = std::sqrt(v);
  for (const auto& m : runs.front()) s.uploads.push_back(m.uploads);
  return s;
}

absl::Status EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    return absl::InvalidArgumentError(
        absl::StrCat("cannot create output directory ", dir, ": ",
                     ec.message()));
  }
  return absl::OkStatus();
}

// One mode at one sweep point.
absl::StatusOr<json> RunPoint(ExperimentConfig cfg,
                              const std::vector<uint64_t>& seeds,
                              const std::string& dir) {
  auto losses = BuildProblem(cfg.problem);
  if (!losses.ok()) return losses.status();
  cfg.fl.N = static_cast<int>(losses->size());
  FEDSPLIT_RETURN_IF_ERROR(ValidateConfig(cfg.fl, *losses));
  auto pc = ComputeConstants(*losses, cfg.fl.radius);
  if (!pc.ok()) return pc.status();
  auto results = RunSeeds(cfg.fl, *losses, seeds);
  if (!results.ok()) return results.status();
  FEDSPLIT_RETURN_IF_ERROR(EnsureDir(dir));

  std::vector<std::vector<RoundMetrics>> metrics;
  double pi_tilde = 0.0;
  for (size_t s = 0; s < seeds.size(); ++s) {
    const RunResult& r = (*results)[s];
    metrics.push_back(r.rounds);
    pi_tilde = std::max(pi_tilde, r.pi_max);
    FEDSPLIT_RETURN_IF_ERROR(WriteFileAtomic(
        absl::StrCat(dir, "/seed_", seeds[s], ".csv"), MetricsCsv(r)));
    for (const auto& tr : r.traces) {
      FEDSPLIT_RETURN_IF_ERROR(WriteFileAtomic(
          absl::StrCat(dir, "/trace_seed_", seeds[s], "_t_", tr.t, ".jsonl"),
          TraceToJsonLines(tr)));
    }
  }
  const SeriesStats stats = Aggregate(metrics);
  const int T = cfg.fl.T;
  const bool quantized = cfg.fl.mode == Algorithm::kMspdq;

  json summary;
  summary["mode"] = AlgorithmName(cfg.fl.mode);
  summary["seeds"] = seeds;
  summary["final_mean_gap"] = stats.mean_gap.back();
  summary["final_mean_dist2"] = stats.mean_dist2.back();
  const int t_lo = std::min(50, std::max(1, T / 10));
  summary["slope_window"] = {t_lo, T};
  summary["slope"] = T >= 2 ? LogLogSlope(stats.mean_gap, t_lo, T) : 0.0;
  uint64_t expected = 0;
  for (const auto& m : metrics.front()) {
    expected += IsSplitMode(cfg.fl.mode)
                    ? static_cast<uint64_t>(cfg.fl.M) * (m.K + 1)
                    : static_cast<uint64_t>(cfg.fl.M);
  }
  const uint64_t total = CommCounter(metrics.front());
  summary["uploads_total"] = total;
  summary["uploads_expected"] = expected;
  summary["uploads_match"] = total == expected;
  int iv = 0, dv = 0, devv = 0;
  double ratio = 0.0, drift = 0.0;
  bool budget = true;
  for (const auto& r : *results) {
    iv += r.interval_violations;
    dv += r.delta_violations;
    devv += r.deviation_violations;
    ratio = std::max(ratio, r.max_delta_ratio);
    drift = std::max(drift, r.max_conservation_drift);
    budget = budget && r.bit_budget_ok;
  }
  summary["interval_violations"] = iv;
  summary["delta_violations"] = dv;
  summary["deviation_bound_violations"] = devv;
  summary["max_delta_ratio"] = ratio;
  summary["max_conservation_drift"] = drift;
  summary["bit_budget_ok"] = budget;

  json manifest;
  manifest["config"] = FLConfigToJson(cfg.fl);
  manifest["source"] = cfg.source;
  manifest["seeds"] = seeds;
  manifest["problem_constants"] = ProblemConstantsJson(*pc);
  if (IsSplitMode(cfg.fl.mode)) {
    auto tc = ComputeTheoremConstants(cfg.fl, *losses, pi_tilde);
    if (!tc.ok()) return tc.status();
    manifest["theorem"] = TheoremJson(*tc);
    manifest["quantized"] = quantized;
    int bound_violations = 0;
    for (int t = 1; t <= T; ++t) {
      if (stats.mean_gap[t - 1] > tc->BoundCurve(t, quantized)) {
        ++bound_violations;
      }
    }
    summary["bound_violations"] = bound_violations;
    json reach = json::array();
    for (double rho : kReachTargets) {
      json row;
      row["rho"] = rho;
      auto got = UploadsToReach(stats.mean_dist2, stats.uploads, rho,
                                tc->dist0_sq);
      row["measured_uploads"] = got ? json(*got) : json(nullptr);
      row["bound"] = CommComplexityBound(rho, *tc);
      reach.push_back(row);
    }
    summary["reach"] = reach;
  }
  FEDSPLIT_RETURN_IF_ERROR(
      WriteFileAtomic(dir + "/problem.json", ProblemToJson(*losses).dump(1)));
  FEDSPLIT_RETURN_IF_ERROR(
      WriteFileAtomic(dir + "/manifest.json", manifest.dump(2) + "\n"));
  FEDSPLIT_RETURN_IF_ERROR(
      WriteFileAtomic(dir + "/summary.json", summary.dump(2) + "\n"));
  return summary;
}

int Report(const absl::Status& s) {
  std::cerr << "error: " << s.message() << "\n";
  return ExitCodeFor(s);
}

absl::StatusOr<std::vector<std::vector<double>>> ReadCsv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("missing file ", path));
  std::vector<std::vector<double>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (absl::string_view cell : absl::StrSplit(line, ',')) {
      double v = 0.0;
      if (!absl::SimpleAtod(cell, &v)) {
        return absl::DataLossError(absl::StrCat("bad number in ", path));
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

int ExitCodeFor(const absl::Status& status) {
  if (status.ok()) return kExitOk;
  switch (status.code()) {
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kNotFound:
      return kExitValidation;
    default:
      return kExitInvariant;
  }
}

absl::StatusOr<ExperimentConfig> ParseExperimentConfig(
    const json& doc, const std::string& base_dir) {
  FEDSPLIT_RETURN_IF_ERROR(CheckKeys(doc, {"problem", "fl"}, "config"));
  if (!doc.contains("problem") || !doc.contains("fl")) {
    return Invalid("config needs 'problem' and 'fl' sections");
  }
  ExperimentConfig cfg;
  auto p = ParseProblem(doc.at("problem"), base_dir);
  if (!p.ok()) return p.status();
  cfg.problem = *std::move(p);
  auto f = ParseFl(doc.at("fl"));
  if (!f.ok()) return f.status();
  cfg.fl = *std::move(f);
  // File-backed problems learn N when built.
  if (cfg.problem.clients > 0) cfg.fl.N = cfg.problem.clients;
  cfg.source = doc;
  return cfg;
}

absl::StatusOr<json> ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    return Invalid(absl::StrCat(path, ": ", e.what()));
  }
}

absl::StatusOr<ExperimentConfig> LoadExperimentConfig(const std::string& path) {
  auto doc = ReadJsonFile(path);
  if (!doc.ok()) return doc.status();
  return ParseExperimentConfig(*doc, fs::path(path).parent_path().string());
}

absl::StatusOr<std::vector<QuadraticClientLoss>> BuildProblem(
    const ProblemSpec& spec) {
  if (!spec.file.empty()) {
    auto doc = ReadJsonFile(spec.file);
    if (!doc.ok()) return doc.status();
    return ProblemFromJson(*doc);
  }
  double spread = 0.0;
  if (spec.spread) {
    spread = *spec.spread;
  } else if (spec.gamma_het) {
    auto s = SpreadForGamma(spec.clients, spec.dim, *spec.gamma_het,
                            spec.seed, spec.options);
    if (!s.ok()) return s.status();
    spread = *s;
  } else {
    return Invalid("problem needs 'spread' or 'gamma_het'");
  }
  return MakeQuadraticProblem(spec.clients, spec.dim, spread, spec.seed,
                              spec.options);
}

json FLConfigToJson(const FLConfig& c) {
  json j;
  j["mode"] = AlgorithmName(c.mode);
  j["N"] = c.N;
  j["clients_per_round"] = c.M;
  j["local_steps"] = c.E;
  j["rounds"] = c.T;
  j["epsilon"] = c.epsilon;
  j["gamma"] = c.gamma;
  if (!c.gamma_per_client.empty()) j["gamma_per_client"] = c.gamma_per_client;
  if (!c.m_per_client.empty()) j["m_per_client"] = c.m_per_client;
  j["msp_rule"] =
      c.msp_rule == StepWeights::Rule::kConstant ? "constant" : "harmonic";
  j["lambda"] = c.lambda;
  j["bits"] = c.bits;
  j["levels"] = c.Levels();
  json split;
  split["m"] = c.split.m;
  if (const auto* u = std::get_if<UniformSplit>(&c.split.variant)) {
    split["rule"] = "uniform";
    split["eps_split"] = u->eps_split;
    split["midpoint"] = u->midpoint;
  } else {
    split["rule"] = "laplace";
    split["scale"] = std::get<LaplaceSplit>(c.split.variant).scale;
  }
  j["split"] = split;
  j["radius"] = c.radius;
  j["init_width"] = c.init_width;
  j["w0"] = c.w0;
  j["ldp_scale"] = c.ldp_scale;
  j["fixed_K"] = c.fixed_K;
  j["enforce_bit_budget"] = c.enforce_bit_budget;
  j["strict_intervals"] = c.strict_intervals;
  j["probe_rounds"] = c.probe_rounds;
  j["trace_rounds"] = std::vector<int>(c.trace_rounds.begin(),
                                       c.trace_rounds.end());
  j["seed"] = c.seed;
  return j;
}

absl::StatusOr<std::vector<uint64_t>> ParseSeeds(const std::string& text) {
  std::vector<uint64_t> out;
  const std::vector<std::string> range = absl::StrSplit(text, "..");
  if (range.size() == 2) {
    uint64_t a = 0, b = 0;
    if (!absl::SimpleAtoi(range[0], &a) || !absl::SimpleAtoi(range[1], &b) ||
        b < a) {
      return Invalid(absl::StrCat("bad seed range '", text, "'"));
    }
    for (uint64_t s = a; s <= b; ++s) out.push_back(s);
    return out;
  }
  for (absl::string_view part : absl::StrSplit(text, ',')) {
    uint64_t s = 0;
    if (!absl::SimpleAtoi(part, &s)) {
      return Invalid(absl::StrCat("bad seed '", part, "'"));
    }
    out.push_back(s);
  }
  if (out.empty()) return Invalid("no seeds");
  return out;
}

absl::StatusOr<SweepAxis> ParseSweep(const std::string& text) {
  const std::vector<std::string> kv = absl::StrSplit(text, absl::MaxSplits('=', 1));
  static const std::set<std::string> kKeys = {
      "bits",      "eps_split", "gamma", "M", "spread",
      "gamma_het", "epsilon",   "m",     "ldp_scale"};
  if (kv.size() != 2 || !kKeys.contains(kv[0])) {
    return Invalid(absl::StrCat("bad sweep '", text, "'; keys: ",
                                absl::StrJoin(kKeys, ", ")));
  }
  SweepAxis axis;
  axis.key = kv[0];
  for (absl::string_view v : absl::StrSplit(kv[1], ',')) {
    double x = 0.0;
    if (!absl::SimpleAtod(v, &x)) {
      return Invalid(absl::StrCat("bad sweep value '", v, "'"));
    }
    axis.values.push_back(x);
  }
  return axis;
}

absl::Status ApplySweepValue(json& doc, const std::string& key, double value) {
  json& fl = doc["fl"];
  json& problem = doc["problem"];
  const auto as_int = [&]() -> absl::StatusOr<int> {
    if (value != std::floor(value)) {
      return Invalid(absl::StrCat("sweep '", key, "' needs integers"));
    }
    return static_cast<int>(value);
  };
  if (key == "bits" || key == "M" || key == "m") {
    auto v = as_int();
    if (!v.ok()) return v.status();
    if (key == "bits") {
      fl["bits"] = *v;
      fl.erase("levels");
    } else if (key == "M") {
      fl["clients_per_round"] = *v;
    } else {
      fl["split"]["m"] = *v;
      fl.erase("m_per_client");
    }
  } else if (key == "eps_split") {
    fl["split"]["eps_split"] = value;
  } else if (key == "gamma") {
    fl["gamma"] = value;
    fl.erase("gamma_per_client");
  } else if (key == "epsilon") {
    fl["epsilon"] = value;
  } else if (key == "ldp_scale") {
    fl["ldp_scale"] = value;
  } else if (key == "spread" || key == "gamma_het") {
    problem.erase("spread");
    problem.erase("gamma_het");
    problem[key] = value;
  } else {
    return Invalid(absl::StrCat("unknown sweep key '", key, "'"));
  }
  return absl::OkStatus();
}

absl::Status WriteFileAtomic(const std::string& path,
                             const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return Invalid(absl::StrCat("cannot write ", tmp));
    out << content;
    if (!out) return absl::InternalError(absl::StrCat("write failed: ", tmp));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    return absl::InternalError(absl::StrCat("rename failed: ", ec.message()));
  }
  return absl::OkStatus();
}

std::string MetricsCsv(const RunResult& result) {
  std::string out =
      "t,gap,dist2,K,uploads,bits,max_width,max_delta_ratio,w_tilde,pi\n";
  for (const auto& m : result.rounds) {
    absl::StrAppend(&out, m.t, ",", Num(m.gap), ",", Num(m.dist2), ",", m.K,
                    ",", m.uploads, ",", m.bits, ",", Num(m.max_width), ",",
                    Num(m.max_delta_ratio), ",", Num(m.w_tilde), ",",
                    Num(m.pi), "\n");
  }
  return out;
}

int CmdValidate(const std::string& config_path) {
  auto cfg = LoadExperimentConfig(config_path);
  if (!cfg.ok()) return Report(cfg.status());
  auto losses = BuildProblem(cfg->problem);
  if (!losses.ok()) return Report(losses.status());
  FLConfig fl = cfg->fl;
  fl.N = static_cast<int>(losses->size());
  if (auto s = ValidateConfig(fl, *losses); !s.ok()) return Report(s);
  std::cout << "config ok: " << AlgorithmName(fl.mode) << ", N=" << fl.N
            << ", M=" << fl.M << ", T=" << fl.T << "\n";
  return kExitOk;
}

int CmdRun(const RunSpec& spec) {
  auto base = ReadJsonFile(spec.config_path);
  if (!base.ok()) return Report(base.status());
  const std::string base_dir = fs::path(spec.config_path).parent_path().string();
  std::vector<std::string> modes;
  if (!spec.modes.empty()) {
    modes = absl::StrSplit(spec.modes, ',', absl::SkipEmpty());
  } else if (base->contains("fl") && (*base)["fl"].contains("mode") &&
             (*base)["fl"]["mode"].is_string()) {
    modes.push_back((*base)["fl"]["mode"].get<std::string>());
  } else {
    return Report(Invalid("no mode given"));
  }
  std::vector<std::pair<std::string, json>> points;
  if (spec.sweep) {
    for (double v : spec.sweep->values) {
      json doc = *base;
      if (auto s = ApplySweepValue(doc, spec.sweep->key, v); !s.ok()) {
        return Report(s);
      }
      points.emplace_back(absl::StrCat(spec.sweep->key, "=", v), doc);
    }
  } else {
    points.emplace_back("", *base);
  }
  if (auto s = EnsureDir(spec.out); !s.ok()) return Report(s);

  json all = json::array();
  for (const auto& mode : modes) {
    for (const auto& [label, doc] : points) {
      json d = doc;
      d["fl"]["mode"] = mode;
      auto cfg = ParseExperimentConfig(d, base_dir);
      if (!cfg.ok()) return Report(cfg.status());
      const std::string name =
          label.empty() ? mode : absl::StrCat(mode, "_", label);
      auto summary = RunPoint(*std::move(cfg), spec.seeds, spec.out + "/" + name);
      if (!summary.ok()) return Report(summary.status());
      json entry;
      entry["point"] = name;
      entry["summary"] = *summary;
      all.push_back(entry);
      std::cout << name << ": final mean gap "
                << (*summary)["final_mean_gap"].get<double>() << ", slope "
                << (*summary)["slope"].get<double>() << "\n";
    }
  }
  json manifest;
  manifest["config_path"] = spec.config_path;
  manifest["source"] = *base;
  manifest["modes"] = modes;
  manifest["seeds"] = spec.seeds;
  if (spec.sweep) {
    manifest["sweep"] = {{"key", spec.sweep->key},
                         {"values", spec.sweep->values}};
  }
  json points_list = json::array();
  for (const auto& e : all) points_list.push_back(e["point"]);
  manifest["points"] = points_list;
  if (auto s = WriteFileAtomic(spec.out + "/manifest.json",
                               manifest.dump(2) + "\n");
      !s.ok()) {
    return Report(s);
  }
  if (auto s = WriteFileAtomic(spec.out + "/summary.json", all.dump(2) + "\n");
      !s.ok()) {
    return Report(s);
  }
  return kExitOk;
}

int CmdAudit(const AuditSpec& spec) {
  auto cfg = LoadExperimentConfig(spec.config_path);
  if (!cfg.ok()) return Report(cfg.status());
  auto losses = BuildProblem(cfg->problem);
  if (!losses.ok()) return Report(losses.status());
  FLConfig fl = cfg->fl;
  fl.N = static_cast<int>(losses->size());
  fl.mode = Algorithm::kMsp;
  fl.T = spec.learning_rounds;
  fl.seed = spec.seed;
  fl.trace_rounds.clear();
  for (int t = 1; t <= fl.T; ++t) fl.trace_rounds.insert(t);
  if (auto s = ValidateConfig(fl, *losses); !s.ok()) return Report(s);
  auto run = RunMspFl(fl, *losses);
  if (!run.ok()) return Report(run.status());

  WitnessAuditOptions opts;
  opts.tuples = spec.tuples;
  opts.magnitudes = spec.magnitudes;
  opts.seed = spec.seed;
  opts.mutate = spec.mutate;
  auto audit = RunWitnessAudit(run->traces, opts);
  if (!audit.ok()) return Report(audit.status());

  json out;
  out["mutated"] = spec.mutate;
  out["all_pass"] = audit->all_pass;
  json cases = json::array();
  int failures = 0;
  for (const auto& c : audit->cases) {
    json j;
    j["trace_t"] = run->traces[c.trace_index].t;
    j["i"] = c.i;
    j["j"] = c.j;
    j["magnitude"] = c.magnitude;
    j["corrupted"] = c.corrupted;
    j["redraws"] = c.redraws;
    j["replay_deviation"] = c.replay_deviation;
    j["replay_pass"] = c.replay_pass;
    if (!c.replay_pass) j["replay_location"] = c.replay_location;
    j["min_mutation_deviation"] = c.min_mutation_deviation;
    j["weakest_mutation"] = c.weakest_mutation;
    j["mutations_detected"] = c.mutations_detected;
    failures += !(c.replay_pass && c.mutations_detected);
    cases.push_back(j);
  }
  out["cases"] = cases;
  out["failures"] = failures;
  if (auto s = WriteFileAtomic(spec.out, out.dump(2) + "\n"); !s.ok()) {
    return Report(s);
  }
  std::cout << audit->cases.size() - failures << "/" << audit->cases.size()
            << " witness checks passed\n";
  return audit->all_pass ? kExitOk : kExitInvariant;
}

int CmdReport(const ReportSpec& spec) {
  auto top = ReadJsonFile(spec.run_dir + "/manifest.json");
  if (!top.ok()) return Report(top.status());
  const std::string out_dir =
      spec.out.empty() ? spec.run_dir + "/report" : spec.out;
  if (auto s = EnsureDir(out_dir); !s.ok()) return Report(s);
  json flags = json::array();
  for (const auto& point : (*top)["points"]) {
    const std::string name = point.get<std::string>();
    const std::string dir = spec.run_dir + "/" + name;
    auto manifest = ReadJsonFile(dir + "/manifest.json");
    if (!manifest.ok()) return Report(manifest.status());
    std::vector<std::vector<RoundMetrics>> runs;
    for (const auto& seed : (*manifest)["seeds"]) {
      auto rows = ReadCsv(absl::StrCat(dir, "/seed_", seed.get<uint64_t>(),
                                       ".csv"));
      if (!rows.ok()) return Report(rows.status());
      std::vector<RoundMetrics> r;
      for (const auto& row : *rows) {
        if (row.size() < 6) return Report(absl::DataLossError("short row"));
        RoundMetrics m;
        m.t = static_cast<int>(row[0]);
        m.gap = row[1];
        m.dist2 = row[2];
        m.K = static_cast<int>(row[3]);
        m.uploads = static_cast<uint64_t>(row[4]);
        m.bits = static_cast<uint64_t>(row[5]);
        r.push_back(m);
      }
      if (r.empty()) return Report(absl::DataLossError("empty run"));
      runs.push_back(std::move(r));
    }
    if (runs.empty()) return Report(absl::NotFoundError("missing runs"));
    const SeriesStats stats = Aggregate(runs);
    std::optional<TheoremConstants> tc;
    bool quantized = false;
    if (manifest->contains("theorem")) {
      tc = TheoremFromJson((*manifest)["theorem"]);
      quantized = (*manifest)["quantized"].get<bool>();
    }
    int violations = 0;
    std::string gap = "t,mean,std,bound\n";
    std::string bits = "t,mean_bits,cumulative_bits\n";
    double cumulative = 0.0;
    for (size_t t = 1; t <= stats.mean_gap.size(); ++t) {
      const double bound =
          tc ? tc->BoundCurve(static_cast<int>(t), quantized)
             : std::numeric_limits<double>::quiet_NaN();
      if (tc && stats.mean_gap[t - 1] > bound) ++violations;
      absl::StrAppend(&gap, t, ",", Num(stats.mean_gap[t - 1]), ",",
                      Num(stats.std_gap[t - 1]), ",", Num(bound), "\n");
      cumulative += stats.mean_bits[t - 1];
      absl::StrAppend(&bits, t, ",", Num(stats.mean_bits[t - 1]), ",",
                      Num(cumulative), "\n");
    }
    std::string cx = "rho,measured_uploads,bound\n";
    if (tc) {
      for (double rho : kReachTargets) {
        auto got = UploadsToReach(stats.mean_dist2, stats.uploads, rho,
                                  tc->dist0_sq);
        absl::StrAppend(&cx, Num(rho), ",", got ? absl::StrCat(*got) : "nan",
                        ",", Num(CommComplexityBound(rho, *tc)), "\n");
      }
    }
    for (const auto& [file, body] :
         {std::pair{"gap_vs_t.csv", &gap}, std::pair{"bits_vs_t.csv", &bits},
          std::pair{"complexity.csv", &cx}}) {
      if (auto s = WriteFileAtomic(
              absl::StrCat(out_dir, "/", name, "_", file), *body);
          !s.ok()) {
        return Report(s);
      }
    }
    json f;
    f["point"] = name;
    f["bound_violations"] = violations;
    flags.push_back(f);
    if (violations > 0) {
      std::cout << name << ": mean gap exceeds the bound at " << violations
                << " rounds\n";
    }
  }
  if (auto s = WriteFileAtomic(out_dir + "/report_summary.json",
                               flags.dump(2) + "\n");
      !s.ok()) {
    return Report(s);
  }
  return kExitOk;
}

}  // namespace fedsplit
