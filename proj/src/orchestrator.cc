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

#include "fedsplit/orchestrator.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <atomic>
#include <cstdlib>
#include <numeric>
#include <thread>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "fedsplit/quantizer.h"

namespace fedsplit {
namespace {

constexpr double kBitsPerFloat = 64.0;

struct RunContext {
  Optimum opt;
  double lambda2_u = 0.0;
  double vartheta = 0.0;
  double mu = 0.0;
  std::vector<double> p;
};

absl::StatusOr<RunContext> MakeContext(
    const FLConfig& config, std::span<const QuadraticClientLoss> losses) {
  if (static_cast<int>(losses.size()) != config.N) {
    return absl::InvalidArgumentError(
        absl::StrCat("problem has ", losses.size(), " clients, config N=",
                     config.N));
  }
  if (auto s = ValidateLosses(losses); !s.ok()) return s;
  RunContext ctx;
  auto opt = GlobalOptimum(losses);
  if (!opt.ok()) return opt.status();
  ctx.opt = *std::move(opt);
  auto pc = ComputeConstants(losses, config.radius);
  if (!pc.ok()) return pc.status();
  ctx.mu = pc->mu;
  ctx.vartheta = Vartheta(pc->L, pc->mu, config.E);
  if (config.mode == Algorithm::kMspdq || config.mode == Algorithm::kMsp) {
    auto u = BuildU(config.M, config.epsilon);
    if (!u.ok()) return u.status();
    ctx.lambda2_u = Lambda2(*u);
  }
  for (const auto& l : losses) ctx.p.push_back(l.p);
  return ctx;
}

absl::Status CheckBall(const ModelVec& w, const RunContext& ctx, double radius,
                       int t, const char* what) {
  const double r = (w - ctx.opt.w_star).norm();
  if (!(r <= radius)) {
    return absl::OutOfRangeError(absl::StrCat(
        what, " left the operating ball at t=", t, ": ||w - w*|| = ", r,
        " > R = ", radius));
  }
  return absl::OkStatus();
}

RoundMetrics BaseMetrics(int t, const ModelVec& w,
                         std::span<const QuadraticClientLoss> losses,
                         const RunContext& ctx) {
  RoundMetrics m;
  m.t = t;
  m.gap = std::max(0.0, GlobalLoss(losses, w) - ctx.opt.f_star);
  m.dist2 = (w - ctx.opt.w_star).squaredNorm();
  return m;
}

// Sampling, local SGD and ball check shared by every mode.
absl::StatusOr<std::vector<ModelVec>> LocalRound(
    const FLConfig& config, std::span<const QuadraticClientLoss> losses,
    const RunContext& ctx, const ModelVec& w, int t, std::vector<int>* ids) {
  Rng srng = MakeRng(config.seed, Purpose::kSampling, t);
  auto sel = SampleClients(ctx.p, config.M, srng);
  if (!sel.ok()) return sel.status();
  *ids = *std::move(sel);
  const double eta = LrSchedule(t, ctx.mu, ctx.vartheta);
  std::vector<ModelVec> locals;
  locals.reserve(config.M);
  for (int s = 0; s < config.M; ++s) {
    Rng rng = MakeRng(config.seed, Purpose::kSgd, t, 0, s);
    locals.push_back(LocalSgd(w, losses[(*ids)[s]], eta, config.E, rng));
    if (auto st = CheckBall(locals.back(), ctx, config.radius, t,
                            "local model");
        !st.ok()) {
      return st;
    }
  }
  return locals;
}

StepWeights WeightsFor(const FLConfig& config, std::span<const int> ids,
                       StepWeights::Rule rule) {
  std::vector<double> g;
  std::vector<int> m;
  for (int id : ids) {
    g.push_back(config.Gamma(id));
    m.push_back(config.InvisibleCount(id));
  }
  return StepWeights(rule, std::move(g), std::move(m));
}

absl::StatusOr<std::vector<SplitState>> SplitAll(
    const FLConfig& config, std::span<const ModelVec> locals,
    std::span<const int> ids, int t) {
  std::vector<SplitState> out;
  out.reserve(locals.size());
  for (size_t s = 0; s < locals.size(); ++s) {
    SplitRule rule = config.split;
    rule.m = config.InvisibleCount(ids[s]);
    Rng rng = MakeRng(config.seed, Purpose::kSplit, t, 0, s);
    auto st = SplitModel(locals[s], rule, rng);
    if (!st.ok()) return st.status();
    out.push_back(*std::move(st));
  }
  return out;
}

double Laplace(double scale, Rng& rng) {
  // Inverse CDF; u = 0 maps to a finite tail value via the open interval.
  double u = 0.0;
  do {
    u = Uniform01(rng) - 0.5;
  } while (u == -0.5);
  return -scale * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
}

absl::StatusOr<RunResult> RunSimple(const FLConfig& config,
                                    std::span<const QuadraticClientLoss> losses,
                                    double noise_scale) {
  auto ctx = MakeContext(config, losses);
  if (!ctx.ok()) return ctx.status();
  const int d = static_cast<int>(losses.front().b.size());
  RunResult result;
  ModelVec w = ModelVec::Constant(d, config.w0);
  for (int t = 1; t <= config.T; ++t) {
    std::vector<int> ids;
    auto locals = LocalRound(config, losses, *ctx, w, t, &ids);
    if (!locals.ok()) return locals.status();
    if (noise_scale > 0.0) {
      for (int s = 0; s < config.M; ++s) {
        Rng rng = MakeRng(config.seed, Purpose::kLdpNoise, t, 0, s);
        for (int j = 0; j < d; ++j) (*locals)[s](j) += Laplace(noise_scale, rng);
      }
    }
    w = MeanOf(*locals);
    RoundMetrics m = BaseMetrics(t, w, losses, *ctx);
    m.uploads = config.M;
    m.bits = static_cast<uint64_t>(kBitsPerFloat * d * config.M);
    result.rounds.push_back(m);
  }
  result.final_model = w;
  return result;
}

}  // namespace

std::string AlgorithmName(Algorithm a) {
  switch (a) {
    case Algorithm::kFedAvg:
      return "fedavg";
    case Algorithm::kLdp:
      return "ldp";
    case Algorithm::kMsp:
      return "msp";
    case Algorithm::kMspdq:
      return "mspdq";
  }
  return "unknown";
}

absl::StatusOr<Algorithm> ParseAlgorithm(const std::string& name) {
  for (Algorithm a : {Algorithm::kFedAvg, Algorithm::kLdp, Algorithm::kMsp,
                      Algorithm::kMspdq}) {
    if (AlgorithmName(a) == name) return a;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown mode '", name, "'"));
}

int FLConfig::InvisibleCount(int client) const {
  if (m_per_client.empty()) return split.m;
  return m_per_client[client];
}

double FLConfig::Gamma(int client) const {
  if (gamma_per_client.empty()) return gamma;
  return gamma_per_client[client];
}

absl::Status ValidateConfig(const FLConfig& config,
                            std::span<const QuadraticClientLoss> losses) {
  auto bad = [](auto... parts) {
    return absl::InvalidArgumentError(absl::StrCat(parts...));
  };
  if (config.N < 1 || config.M < 1 || config.E < 1 || config.T < 1) {
    return bad("N, M, E and T must be >= 1");
  }
  if (static_cast<int>(losses.size()) != config.N) {
    return bad("problem has ", losses.size(), " clients, config N=", config.N);
  }
  if (!config.m_per_client.empty() &&
      static_cast<int>(config.m_per_client.size()) != config.N) {
    return bad("m_per_client needs N entries");
  }
  if (!config.gamma_per_client.empty() &&
      static_cast<int>(config.gamma_per_client.size()) != config.N) {
    return bad("gamma_per_client needs N entries");
  }
  if (!(config.radius > 0.0)) return bad("radius must be > 0");
  if (!(config.ldp_scale >= 0.0)) return bad("ldp_scale must be >= 0");
  if (config.mode == Algorithm::kFedAvg || config.mode == Algorithm::kLdp) {
    return absl::OkStatus();
  }
  if (config.M < 2) return bad("splitting modes need M >= 2");
  if (auto s = ValidateSplitRule(config.split); !s.ok()) return s;
  for (int i = 0; i < config.N; ++i) {
    if (config.InvisibleCount(i) < 1) return bad("m_i must be >= 1");
    if (!(config.Gamma(i) > 0.0)) return bad("gamma_i must be > 0");
  }
  auto u = BuildU(config.M, config.epsilon);
  if (!u.ok()) return u.status();
  const double lmin = LambdaMin(*u);
  if (!(lmin > 0.0)) {
    return bad("lambda_min(U) = ", lmin, " must be > 0");
  }
  double gmax = 0.0;
  for (int i = 0; i < config.N; ++i) gmax = std::max(gmax, config.Gamma(i));
  if (!(gmax < StepWeightBound(lmin))) {
    return bad("gamma_max = ", gmax, " violates gamma_max < ",
               StepWeightBound(lmin), " = lambda_min/(1+lambda_min)");
  }
  if (!(config.lambda > 0.0 && config.lambda < 1.0)) {
    return bad("lambda must lie in (0, 1)");
  }
  if (config.fixed_K < 0) return bad("fixed_K must be >= 0");
  int m_max = 1;
  for (int i = 0; i < config.N; ++i) {
    m_max = std::max(m_max, config.InvisibleCount(i));
  }
  const auto rule = config.mode == Algorithm::kMspdq
                        ? StepWeights::Rule::kHarmonic
                        : config.msp_rule;
  const StepWeights probe_w = StepWeights::Uniform(rule, config.M, gmax, m_max);
  auto probe = ProbeContraction(config.M, config.epsilon, probe_w,
                                std::max(config.probe_rounds, 2),
                                config.lambda);
  if (!probe.ok()) return probe.status();
  if (!(config.lambda > probe->rate)) {
    return bad("lambda = ", config.lambda,
               " must exceed the measured contraction rate ", probe->rate);
  }
  if (config.mode == Algorithm::kMspdq) {
    if (config.bits < 1 || config.bits > 30) return bad("bits must be in [1, 30]");
    const int l = config.Levels();
    if (l < 2 || BitsForLevels(l) != config.bits) {
      return bad("levels = ", l, " needs exactly ", BitsForLevels(l),
                 " bits, got ", config.bits);
    }
    if (!(config.init_width > 0.0)) return bad("init_width must be > 0");
    if (config.enforce_bit_budget) {
      // pi grows with W-tilde, so the W-tilde = 0 value is the tightest case.
      auto pi0 = ComputePiT(config.epsilon, Lambda2(*u), 0.0);
      if (!pi0.ok()) return pi0.status();
      const int d = static_cast<int>(losses.front().b.size());
      if (!BitBudgetOk(config.bits, config.M, d, *pi0)) {
        return bad("bits = ", config.bits, " exceed the bit budget log2(",
                   "sqrt(Md) pi + 1) at pi = ", *pi0);
      }
    }
  }
  return absl::OkStatus();
}

double Vartheta(double L, double mu, int E) {
  return std::max(8.0 * L / mu, static_cast<double>(E)) - 1.0;
}

double LrSchedule(int t, double mu, double vartheta) {
  return 2.0 / (mu * (vartheta + t));
}

absl::StatusOr<int> KtSchedule(int t, double mu, double vartheta,
                               double lambda, ConsensusMode mode) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    return absl::InvalidArgumentError("lambda must lie in (0, 1)");
  }
  const double x = mu * (vartheta + t);
  const int k_log = std::max(
      1, static_cast<int>(std::ceil(std::log(2.0 / x) / std::log(lambda) -
                                    1e-12)));
  if (mode == ConsensusMode::kMsp) return k_log;
  return std::max(k_log, static_cast<int>(std::ceil(x / 2.0 - 1e-12)));
}

absl::StatusOr<std::vector<int>> SampleClients(std::span<const double> p,
                                               int M, Rng& rng) {
  if (p.empty() || M < 1) return absl::InvalidArgumentError("empty sampling");
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) return absl::InvalidArgumentError("negative probability");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    return absl::InvalidArgumentError("probabilities must sum to 1");
  }
  std::discrete_distribution<int> dist(p.begin(), p.end());
  std::vector<int> out(M);
  for (int& x : out) x = dist(rng);
  return out;
}

ModelVec LocalSgd(const ModelVec& w0, const QuadraticClientLoss& loss,
                  double eta, int E, Rng& rng) {
  ModelVec w = w0;
  for (int e = 0; e < E; ++e) {
    const std::vector<int> batch = DrawBatch(loss, rng);
    auto g = StochasticGradient(loss, w, batch);
    w -= eta * (g.ok() ? *g : FullGradient(loss, w));
  }
  return w;
}

absl::StatusOr<RunResult> RunFedAvg(
    const FLConfig& config, std::span<const QuadraticClientLoss> losses) {
  return RunSimple(config, losses, 0.0);
}

absl::StatusOr<RunResult> RunLdp(const FLConfig& config,
                                 std::span<const QuadraticClientLoss> losses) {
  return RunSimple(config, losses, config.ldp_scale);
}

absl::StatusOr<RunResult> RunMspFl(
    const FLConfig& config, std::span<const QuadraticClientLoss> losses) {
  auto ctx = MakeContext(config, losses);
  if (!ctx.ok()) return ctx.status();
  const int d = static_cast<int>(losses.front().b.size());
  RunResult result;
  ModelVec w = ModelVec::Constant(d, config.w0);
  for (int t = 1; t <= config.T; ++t) {
    std::vector<int> ids;
    auto locals = LocalRound(config, losses, *ctx, w, t, &ids);
    if (!locals.ok()) return locals.status();
    auto splits = SplitAll(config, *locals, ids, t);
    if (!splits.ok()) return splits.status();
    int K = config.fixed_K;
    if (K <= 0) {
      auto k = KtSchedule(t, ctx->mu, ctx->vartheta, config.lambda,
                          ConsensusMode::kMsp);
      if (!k.ok()) return k.status();
      K = *k;
    }
    const StepWeights weights = WeightsFor(config, ids, config.msp_rule);
    ConsensusOptions opts;
    opts.mode = ConsensusMode::kMsp;
    opts.K = K;
    opts.epsilon = config.epsilon;
    opts.weights = &weights;
    opts.lambda = config.lambda;
    opts.record_trace = config.trace_rounds.contains(t);
    auto cr = RunConsensus(MakeRoundState(*std::move(splits), t), opts, {}, ids);
    if (!cr.ok()) return cr.status();
    w = cr->final_state.global;
    if (auto st = CheckBall(w, *ctx, config.radius, t, "global model");
        !st.ok()) {
      return st;
    }
    RoundMetrics m = BaseMetrics(t, w, losses, *ctx);
    m.K = K;
    m.uploads = cr->diag.uploads;
    m.bits = static_cast<uint64_t>(kBitsPerFloat * d) * cr->diag.uploads;
    result.rounds.push_back(m);
    result.max_conservation_drift =
        std::max(result.max_conservation_drift, cr->diag.conservation_drift);
    if (opts.record_trace) result.traces.push_back(std::move(cr->trace));
  }
  result.final_model = w;
  return result;
}

absl::StatusOr<RunResult> RunMspdqFl(
    const FLConfig& config, std::span<const QuadraticClientLoss> losses) {
  auto ctx = MakeContext(config, losses);
  if (!ctx.ok()) return ctx.status();
  const int d = static_cast<int>(losses.front().b.size());
  const int levels = config.Levels();
  const int tau0 = (levels - 1) / 2;
  const double spacing = config.init_width / (levels - 1);
  RunResult result;
  result.pi_min = std::numeric_limits<double>::infinity();
  ModelVec w = ModelVec::Constant(d, config.w0);
  for (int t = 1; t <= config.T; ++t) {
    std::vector<int> ids;
    auto locals = LocalRound(config, losses, *ctx, w, t, &ids);
    if (!locals.ok()) return locals.status();
    auto splits = SplitAll(config, *locals, ids, t);
    if (!splits.ok()) return splits.status();

    // Initial interval places the broadcast model on knob tau0; that knob is
    // the shared visible part of every client.
    const ModelVec lo = w.array() - tau0 * spacing;
    const ModelVec hi = lo.array() + config.init_width;
    auto r0 = MakeQuantizerState(lo, hi, levels);
    if (!r0.ok()) return r0.status();
    QuantizedVector knob;
    knob.indices.assign(d, static_cast<uint32_t>(tau0));
    const ModelVec shared = Dequantize(knob, *r0);
    for (auto& s : *splits) ReplaceVisible(s, shared);

    int K = config.fixed_K;
    if (K <= 0) {
      auto k = KtSchedule(t, ctx->mu, ctx->vartheta, config.lambda,
                          ConsensusMode::kMspdq);
      if (!k.ok()) return k.status();
      K = *k;
    }
    const StepWeights weights =
        WeightsFor(config, ids, StepWeights::Rule::kHarmonic);
    ConsensusOptions opts;
    opts.mode = ConsensusMode::kMspdq;
    opts.K = K;
    opts.epsilon = config.epsilon;
    opts.weights = &weights;
    opts.levels = levels;
    opts.lambda2_u = ctx->lambda2_u;
    opts.seed = config.seed;
    opts.strict = config.strict_intervals;
    opts.lambda = config.lambda;
    opts.record_trace = config.trace_rounds.contains(t);
    std::vector<QuantizerState> intervals(config.M, *r0);
    auto cr = RunConsensus(MakeRoundState(*std::move(splits), t), opts,
                           std::move(intervals), ids);
    if (!cr.ok()) return cr.status();
    w = cr->final_state.global;
    if (auto st = CheckBall(w, *ctx, config.radius, t, "global model");
        !st.ok()) {
      return st;
    }
    const ConsensusDiagnostics& dg = cr->diag;
    if (!BitBudgetOk(config.bits, config.M, d, dg.pi_max)) {
      result.bit_budget_ok = false;
      if (config.enforce_bit_budget) {
        return absl::OutOfRangeError(absl::StrCat(
            "bit budget violated at t=", t, " with pi = ", dg.pi_max));
      }
    }
    RoundMetrics m = BaseMetrics(t, w, losses, *ctx);
    m.K = K;
    m.uploads = dg.uploads;
    m.bits = dg.payload_bits;
    m.max_width = dg.max_width;
    m.max_delta_ratio = dg.max_delta_ratio;
    m.w_tilde = dg.w_tilde_max;
    m.pi = dg.pi_max;
    result.rounds.push_back(m);
    result.w_tilde_max = std::max(result.w_tilde_max, dg.w_tilde_max);
    result.pi_max = std::max(result.pi_max, dg.pi_max);
    result.pi_min = std::min(result.pi_min, dg.pi_max);
    result.interval_violations += dg.interval_violations;
    result.delta_violations += dg.delta_violations;
    result.deviation_violations += dg.deviation_violations;
    result.max_delta_ratio = std::max(result.max_delta_ratio,
                                      dg.max_delta_ratio);
    result.max_conservation_drift =
        std::max(result.max_conservation_drift, dg.conservation_drift);
    if (opts.record_trace) result.traces.push_back(std::move(cr->trace));
  }
  result.final_model = w;
  return result;
}

absl::StatusOr<RunResult> RunAlgorithm(
    const FLConfig& config, std::span<const QuadraticClientLoss> losses) {
  switch (config.mode) {
    case Algorithm::kFedAvg:
      return RunFedAvg(config, losses);
    case Algorithm::kLdp:
      return RunLdp(config, losses);
    case Algorithm::kMsp:
      return RunMspFl(config, losses);
    case Algorithm::kMspdq:
      return RunMspdqFl(config, losses);
  }
  return absl::InvalidArgumentError("unknown mode");
}

double SplitFactor(double epsilon) {
  return (2.0 * epsilon * epsilon - 4.0 * epsilon + 8.0) / 3.0;
}

double ComputeD3(int dim, double gamma_max, double pi_tilde, int M, int bits) {
  const double levels = std::ldexp(1.0, bits) - 1.0;
  return dim * gamma_max * gamma_max * pi_tilde * pi_tilde /
         (4.0 * M * levels * levels);
}

double TheoremConstants::BoundCurve(int t, bool quantized) const {
  const double D = D2 + (quantized ? D3 : 0.0);
  return 8.0 * L / (mu * (vartheta + t)) *
         (2.0 * D / mu + 0.5 * (8.0 * L + mu * E) * dist0_sq);
}

absl::StatusOr<TheoremConstants> ComputeTheoremConstants(
    const FLConfig& config, std::span<const QuadraticClientLoss> losses,
    double pi_tilde) {
  auto pc = ComputeConstants(losses, config.radius);
  if (!pc.ok()) return pc.status();
  TheoremConstants c;
  c.mu = pc->mu;
  c.L = pc->L;
  c.E = config.E;
  c.M = config.M;
  c.dim = static_cast<int>(losses.front().b.size());
  c.bits = std::max(config.bits, 1);
  c.lambda = config.lambda;
  c.vartheta = Vartheta(c.L, c.mu, c.E);
  c.w_max_norm = pc->w_max_norm;
  c.pi_tilde = pi_tilde;
  int m_max = 1;
  for (int i = 0; i < config.N; ++i) {
    c.gamma_max = std::max(c.gamma_max, config.Gamma(i));
    m_max = std::max(m_max, config.InvisibleCount(i));
  }
  const auto rule = config.mode == Algorithm::kMspdq
                        ? StepWeights::Rule::kHarmonic
                        : config.msp_rule;
  const StepWeights w =
      StepWeights::Uniform(rule, config.M, c.gamma_max, m_max);
  auto probe = ProbeContraction(config.M, config.epsilon, w,
                                std::max(config.probe_rounds, 2),
                                config.lambda);
  if (!probe.ok()) return probe.status();
  c.C = probe->C;
  c.contraction_rate = probe->rate;
  const ModelVec w0 = ModelVec::Constant(c.dim, config.w0);
  c.dist0_sq = (w0 - pc->w_star).squaredNorm();

  double sigma_term = 0.0;
  for (size_t i = 0; i < losses.size(); ++i) {
    sigma_term += losses[i].p * losses[i].p * pc->sigma[i];
  }
  c.D1 = SplitFactor(config.epsilon) * c.C * c.C * c.w_max_norm *
         c.w_max_norm;
  const double E = config.E;
  c.D2 = c.D1 + sigma_term + 6.0 * c.L * pc->gamma_het +
         8.0 * (E - 1.0) * (E - 1.0) * pc->G + 4.0 / config.M * E * E * pc->G;
  c.D3 = ComputeD3(c.dim, c.gamma_max, pi_tilde, config.M, c.bits);
  const double rho = 2.0 / c.mu;
  const double denom = rho * c.mu - 1.0;
  c.nu1 = std::max(rho * rho * c.D2 / denom, (c.vartheta + 1.0) * c.dist0_sq);
  c.nu2 = std::max(rho * rho * (c.D2 + c.D3) / denom,
                   (c.vartheta + 1.0) * c.dist0_sq);
  return c;
}

double CommComplexityFormula(int M, double mu, double vartheta,
                             double ceil_I) {
  if (ceil_I <= 0.0) return 0.0;
  return M * ceil_I * (1.0 + mu * vartheta + 0.5 * mu * (1.0 + ceil_I));
}

double CommComplexityBound(double rho, const TheoremConstants& c) {
  if (!(rho > 0.0) || !(c.dist0_sq > 0.0)) return 0.0;
  const double I = c.nu2 / (rho * c.dist0_sq) - c.vartheta;
  if (I <= 0.0) return 0.0;
  return CommComplexityFormula(c.M, c.mu, c.vartheta, std::ceil(I));
}

uint64_t CommCounter(std::span<const RoundMetrics> metrics) {
  uint64_t total = 0;
  for (const auto& m : metrics) total += m.uploads;
  return total;
}

std::optional<uint64_t> UploadsToReach(std::span<const double> mean_dist2,
                                       std::span<const uint64_t> uploads,
                                       double rho, double dist0_sq) {
  uint64_t acc = 0;
  const size_t n = std::min(mean_dist2.size(), uploads.size());
  for (size_t i = 0; i < n; ++i) {
    acc += uploads[i];
    if (mean_dist2[i] <= rho * dist0_sq) return acc;
  }
  return std::nullopt;
}

int WorkerThreads() {
  if (const char* env = std::getenv("FEDSPLIT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

absl::StatusOr<std::vector<RunResult>> RunSeeds(
    const FLConfig& config, std::span<const QuadraticClientLoss> losses,
    std::span<const uint64_t> seeds) {
  std::vector<absl::StatusOr<RunResult>> out(seeds.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < seeds.size(); i = next++) {
      FLConfig c = config;
      c.seed = seeds[i];
      out[i] = RunAlgorithm(c, losses);
    }
  };
  const int n = std::min<int>(WorkerThreads(), static_cast<int>(seeds.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::vector<RunResult> results;
  results.reserve(seeds.size());
  for (auto& r : out) {
    if (!r.ok()) return r.status();
    results.push_back(*std::move(r));
  }
  return results;
}

double LogLogSlope(std::span<const double> y, int t_lo, int t_hi) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (int t = t_lo; t <= t_hi && t <= static_cast<int>(y.size()); ++t) {
    if (!(y[t - 1] > 0.0)) continue;
    const double x = std::log(static_cast<double>(t));
    const double v = std::log(y[t - 1]);
    sx += x;
    sy += v;
    sxx += x * x;
    sxy += x * v;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace fedsplit
