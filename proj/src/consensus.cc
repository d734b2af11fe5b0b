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

#include "fedsplit/consensus.h"

#include <algorithm>
#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "json.hpp"

namespace fedsplit {
namespace {

double FrobeniusOfRows(std::span<const ModelVec> rows) {
  double acc = 0.0;
  for (const auto& r : rows) acc += r.squaredNorm();
  return std::sqrt(acc);
}

// ||W^alpha - 1 mean||_F over the clients.
double VisibleSpread(const RoundState& state) {
  std::vector<ModelVec> v;
  for (const auto& c : state.clients) v.push_back(c.visible);
  const ModelVec mean = MeanOf(v);
  double acc = 0.0;
  for (const auto& x : v) acc += (x - mean).squaredNorm();
  return std::sqrt(acc);
}


std::vector<double> ToStd(const ModelVec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

TraceRound SnapshotRound(const RoundState& state) {
  TraceRound r;
  r.k = state.k;
  r.global = state.global;
  r.uploads = state.uploads;
  for (const auto& c : state.clients) {
    r.visible.push_back(c.visible);
    r.invisible.push_back(c.invisible);
  }
  return r;
}

WeightTable ScheduleWeights(const StepWeights& schedule, int k, int dim) {
  WeightTable w(schedule.clients());
  for (int i = 0; i < schedule.clients(); ++i) {
    const int m = schedule.invisible_count(i);
    w[i].reserve(m);
    for (int n = 0; n < m; ++n) {
      w[i].push_back(ModelVec::Constant(dim, schedule.At(i, n, k)));
    }
  }
  return w;
}

RoundState MakeRoundState(std::vector<SplitState> clients, int t) {
  RoundState s;
  s.clients = std::move(clients);
  for (const auto& c : s.clients) s.uploads.push_back(c.visible);
  s.global = MeanOf(s.uploads);
  s.t = t;
  return s;
}

ModelVec MeanOf(std::span<const ModelVec> v) {
  ModelVec mean = ModelVec::Zero(v.front().size());
  for (const auto& x : v) mean += x;
  return mean / static_cast<double>(v.size());
}

ModelVec ConservedSum(const RoundState& state) {
  ModelVec total = ModelVec::Zero(state.clients.front().visible.size());
  for (const auto& c : state.clients) total += c.Total();
  return total;
}

ModelVec ConsensusLimit(const RoundState& state) {
  int parts = 0;
  for (const auto& c : state.clients) parts += 1 + c.m();
  return ConservedSum(state) / static_cast<double>(parts);
}

void ApplySplitDynamics(RoundState& state, double epsilon,
                        const WeightTable& weights,
                        std::span<const DriftOverride> overrides) {
  const int M = state.M();
  const double inv_m = 1.0 / M;
  for (int i = 0; i < M; ++i) {
    SplitState& c = state.clients[i];
    const ModelVec alpha = c.visible;
    ModelVec next = alpha + epsilon * (state.global - state.uploads[i]);
    for (const auto& o : overrides) {
      if (o.client != i) continue;
      next.array() += epsilon * (o.weight.array() - inv_m) *
                      (state.uploads[o.partner] - state.uploads[i]).array();
    }
    for (int n = 0; n < c.m(); ++n) {
      const ModelVec& a = weights[i][n];
      const ModelVec diff = c.invisible[n] - alpha;
      next.array() += a.array() * diff.array();
      c.invisible[n].array() -= a.array() * diff.array();
    }
    c.visible = std::move(next);
  }
}

void MspRound(RoundState& state, double epsilon, const WeightTable& weights,
              std::span<const DriftOverride> overrides) {
  ApplySplitDynamics(state, epsilon, weights, overrides);
  for (int i = 0; i < state.M(); ++i) {
    state.uploads[i] = state.clients[i].visible;
  }
  state.global = MeanOf(state.uploads);
  ++state.k;
}

double VisibleInvisibleGap(const RoundState& state) {
  int m = 0;
  for (const auto& c : state.clients) m = std::max(m, c.m());
  double total = 0.0;
  for (int n = 0; n < m; ++n) {
    double acc = 0.0;
    for (const auto& c : state.clients) {
      if (n < c.m()) acc += (c.visible - c.invisible[n]).squaredNorm();
    }
    total += std::sqrt(acc);
  }
  return total;
}

absl::Status MspdqRound(RoundState& state,
                        std::vector<QuantizerState>& intervals, double epsilon,
                        const WeightTable& weights, double pi_t,
                        double a_max_k, uint64_t seed, bool strict,
                        QuantRoundInfo* info) {
  const int M = state.M();
  const std::vector<ModelVec> previous = state.uploads;
  ApplySplitDynamics(state, epsilon, weights);
  QuantRoundInfo local;
  for (int i = 0; i < M; ++i) {
    const int levels = intervals[i].levels;
    auto next = ShrinkInterval(previous[i], pi_t, a_max_k, levels);
    if (!next.ok()) return next.status();
    const ModelVec& alpha = state.clients[i].visible;
    ModelVec input = alpha;
    bool inside = true;
    for (Eigen::Index j = 0; j < alpha.size(); ++j) {
      if (alpha(j) < next->lo(j) || alpha(j) > next->hi(j)) inside = false;
    }
    if (!inside) {
      ++local.interval_violations;
      if (strict) {
        return absl::OutOfRangeError(
            absl::StrCat("visible part of client ", i, " left interval at t=",
                         state.t, " k=", state.k + 1));
      }
      input = alpha.cwiseMax(next->lo).cwiseMin(next->hi);
    }
    SplitMix64 rng(DeriveSeed(seed, Purpose::kQuantize, state.t, state.k + 1, i));
    auto q = Quantize(input, *next, rng);
    if (!q.ok()) return q.status();
    const std::vector<uint8_t> wire = Encode(*q, *next);
    auto received = Decode(wire, *next);
    if (!received.ok()) return received.status();
    const ModelVec upload = Dequantize(*received, *next);
    const double err = (upload - alpha).norm();
    const double bound =
        DynamicErrorBound(pi_t, next->bits, a_max_k, next->dim());
    if (err > bound * (1.0 + 1e-12)) ++local.delta_violations;
    local.max_delta_norm = std::max(local.max_delta_norm, err);
    local.delta_bound = bound;
    local.max_width = std::max(local.max_width, next->MaxWidth());
    local.payload_bits += static_cast<uint64_t>(next->bits) * next->dim();
    state.uploads[i] = upload;
    intervals[i] = *std::move(next);
  }
  state.global = MeanOf(state.uploads);
  ++state.k;
  if (info != nullptr) *info = local;
  return absl::OkStatus();
}

absl::StatusOr<ConsensusResult> RunConsensus(
    RoundState initial, const ConsensusOptions& options,
    std::vector<QuantizerState> initial_intervals,
    std::vector<int> client_ids) {
  if (options.K < 1) return absl::InvalidArgumentError("K must be >= 1");
  if (options.weights == nullptr) {
    return absl::InvalidArgumentError("missing step weights");
  }
  const int M = initial.M();
  if (options.weights->clients() != M) {
    return absl::InvalidArgumentError("step weights size != M");
  }
  const int d = static_cast<int>(initial.global.size());
  ConsensusResult result;
  RoundState& state = result.final_state;
  state = std::move(initial);
  ConsensusDiagnostics& diag = result.diag;
  ConsensusTrace& trace = result.trace;
  trace.t = state.t;
  trace.epsilon = options.epsilon;
  trace.mode = options.mode;
  trace.client_ids = std::move(client_ids);
  if (options.record_trace) trace.initial = state.clients;

  const bool quantized = options.mode == ConsensusMode::kMspdq;
  std::vector<QuantizerState> intervals = std::move(initial_intervals);
  double dev_delta = 0.0;
  double dev_a = 0.0;
  double last_delta = 0.0;
  if (quantized) {
    if (static_cast<int>(intervals.size()) != M) {
      return absl::InvalidArgumentError("need one initial interval per client");
    }
    double acc = 0.0;
    for (int i = 0; i < M; ++i) {
      SplitMix64 rng(DeriveSeed(options.seed, Purpose::kQuantize, state.t, 0, i));
      auto q = Quantize(state.clients[i].visible, intervals[i], rng);
      if (!q.ok()) return q.status();
      const std::vector<uint8_t> wire = Encode(*q, intervals[i]);
      auto received = Decode(wire, intervals[i]);
      if (!received.ok()) return received.status();
      state.uploads[i] = Dequantize(*received, intervals[i]);
      acc += (state.uploads[i] - state.clients[i].visible).squaredNorm();
      diag.payload_bits +=
          static_cast<uint64_t>(intervals[i].bits) * intervals[i].dim();
      diag.max_width = std::max(diag.max_width, intervals[i].MaxWidth());
    }
    state.global = MeanOf(state.uploads);
    last_delta = std::sqrt(acc);
  }
  diag.uploads += M;
  const ModelVec total0 = ConservedSum(state);
  if (options.record_trace) trace.rounds.push_back(SnapshotRound(state));

  double w_tilde = 0.0;
  for (int k = 0; k < options.K; ++k) {
    WeightTable weights = ScheduleWeights(*options.weights, k, d);
    double pi = 0.0;
    if (!quantized) {
      MspRound(state, options.epsilon, weights);
    } else {
      w_tilde = std::max(w_tilde, VisibleInvisibleGap(state));
      auto pi_or = ComputePiT(options.epsilon, options.lambda2_u, w_tilde);
      if (!pi_or.ok()) return pi_or.status();
      pi = *pi_or;
      const double a_max = options.weights->MaxAt(k);
      QuantRoundInfo info;
      if (auto s = MspdqRound(state, intervals, options.epsilon, weights, pi,
                              a_max, options.seed, options.strict, &info);
          !s.ok()) {
        return s;
      }
      diag.pi_max = std::max(diag.pi_max, pi);
      diag.interval_violations += info.interval_violations;
      diag.delta_violations += info.delta_violations;
      diag.payload_bits += info.payload_bits;
      diag.max_width = std::max(diag.max_width, info.max_width);
      if (info.delta_bound > 0.0) {
        diag.max_delta_ratio = std::max(diag.max_delta_ratio,
                                        info.max_delta_norm / info.delta_bound);
      }
      // Deviation of the visible parts from their mean against the
      // accumulated quantization error and step weights.
      dev_delta = options.lambda * dev_delta + last_delta;
      dev_a = options.lambda * dev_a + a_max;
      std::vector<ModelVec> deltas;
      for (int i = 0; i < M; ++i) {
        deltas.push_back(state.uploads[i] - state.clients[i].visible);
      }
      last_delta = FrobeniusOfRows(deltas);
      const double bound = 2.0 * dev_delta + w_tilde * dev_a;
      if (VisibleSpread(state) > bound * (1.0 + 1e-9) + 1e-12) {
        ++diag.deviation_violations;
      }
    }
    diag.uploads += M;
    if (options.record_trace) {
      trace.rounds.back().weights = std::move(weights);
      trace.rounds.back().pi = pi;
      trace.rounds.push_back(SnapshotRound(state));
    }
  }
  diag.w_tilde_max = w_tilde;
  const ModelVec total1 = ConservedSum(state);
  diag.conservation_drift =
      (total1 - total0).norm() / std::max(1.0, total0.norm());
  return result;
}

std::string TraceToJsonLines(const ConsensusTrace& trace) {
  std::string out;
  for (const auto& r : trace.rounds) {
    nlohmann::json rec;
    rec["t"] = trace.t;
    rec["k"] = r.k;
    rec["global"] = ToStd(r.global);
    auto& vis = rec["visible"] = nlohmann::json::array();
    for (const auto& v : r.visible) vis.push_back(ToStd(v));
    auto& up = rec["uploads"] = nlohmann::json::array();
    for (const auto& v : r.uploads) up.push_back(ToStd(v));
    // Per-client total weight; the number of invisible parts stays private.
    auto& w = rec["weights"] = nlohmann::json::array();
    for (const auto& client : r.weights) {
      ModelVec sum = ModelVec::Zero(r.global.size());
      for (const auto& a : client) sum += a;
      w.push_back(ToStd(sum));
    }
    if (trace.mode == ConsensusMode::kMspdq) rec["pi"] = r.pi;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

}  // namespace fedsplit
