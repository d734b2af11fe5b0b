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

#include "fedsplit/quantizer.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace fedsplit {
namespace {

void PutU64(uint8_t* out, uint64_t v) {
  for (int b = 0; b < 8; ++b) out[b] = static_cast<uint8_t>(v >> (8 * b));
}

uint64_t GetU64(std::span<const uint8_t> in, size_t pos) {
  uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<uint64_t>(in[pos + b]) << (8 * b);
  return v;
}

struct Header {
  uint64_t d, l, b;
  std::vector<double> lo, hi;
};

absl::StatusOr<Header> ParseHeader(std::span<const uint8_t> bytes) {
  if (bytes.size() < 24) return absl::DataLossError("truncated header");
  Header h;
  h.d = GetU64(bytes, 0);
  h.l = GetU64(bytes, 8);
  h.b = GetU64(bytes, 16);
  if (h.d == 0 || h.d > (1u << 24) || h.l < 2 || h.b < 1 || h.b > 32) {
    return absl::DataLossError("malformed header");
  }
  if (static_cast<int>(h.b) != BitsForLevels(static_cast<int>(h.l))) {
    return absl::DataLossError("header bits do not match levels");
  }
  if (bytes.size() < HeaderSize(static_cast<int>(h.d))) {
    return absl::DataLossError("truncated header");
  }
  h.lo.reserve(h.d);
  h.hi.reserve(h.d);
  size_t pos = 24;
  for (uint64_t j = 0; j < h.d; ++j, pos += 8) {
    h.lo.push_back(std::bit_cast<double>(GetU64(bytes, pos)));
  }
  for (uint64_t j = 0; j < h.d; ++j, pos += 8) {
    h.hi.push_back(std::bit_cast<double>(GetU64(bytes, pos)));
  }
  return h;
}

absl::StatusOr<QuantizedVector> UnpackPayload(std::span<const uint8_t> bytes,
                                              const Header& h) {
  const int d = static_cast<int>(h.d);
  const int bits = static_cast<int>(h.b);
  const size_t need = EncodedSize(d, bits);
  if (bytes.size() < need) return absl::DataLossError("truncated payload");
  if (bytes.size() > need) return absl::DataLossError("trailing bytes");
  const size_t base = HeaderSize(d);
  QuantizedVector q;
  q.indices.resize(d);
  // MSB-first bit reader.
  uint64_t acc = 0;
  int have = 0;
  size_t byte = base;
  for (int j = 0; j < d; ++j) {
    while (have < bits) {
      acc = (acc << 8) | bytes[byte++];
      have += 8;
    }
    const uint32_t v =
        static_cast<uint32_t>((acc >> (have - bits)) & ((1ULL << bits) - 1));
    have -= bits;
    if (v >= h.l) {
      return absl::DataLossError(
          absl::StrCat("index ", v, " at coordinate ", j, " >= levels ", h.l));
    }
    q.indices[j] = v;
  }
  if (have > 0 && (acc & ((1ULL << have) - 1)) != 0) {
    return absl::DataLossError("nonzero padding");
  }
  return q;
}

}  // namespace

double QuantizerState::Knob(int j, int tau) const {
  return lo(j) + tau * (hi(j) - lo(j)) / (levels - 1);
}

double QuantizerState::MaxWidth() const { return (hi - lo).maxCoeff(); }

int BitsForLevels(int levels) {
  int b = 0;
  while ((1LL << b) < levels) ++b;
  return std::max(b, 1);
}

absl::StatusOr<QuantizerState> MakeQuantizerState(const ModelVec& lo,
                                                  const ModelVec& hi,
                                                  int levels) {
  if (levels < 2) return absl::InvalidArgumentError("levels must be >= 2");
  if (lo.size() != hi.size() || lo.size() == 0) {
    return absl::InvalidArgumentError("interval shape");
  }
  for (Eigen::Index j = 0; j < lo.size(); ++j) {
    if (!(hi(j) > lo(j))) {
      return absl::InvalidArgumentError(
          absl::StrCat("empty interval at coordinate ", j));
    }
  }
  QuantizerState qs;
  qs.lo = lo;
  qs.hi = hi;
  qs.levels = levels;
  qs.bits = BitsForLevels(levels);
  return qs;
}

namespace {

// Knobs bracketing x: index `lower` with probability p_down, else lower + 1.
// p_down = 1 when x sits on a knob or at the top.
struct Bracket {
  int lower = 0;
  double p_down = 1.0;
};

absl::StatusOr<Bracket> FindBracket(const QuantizerState& qs, int j, double x) {
  if (!(x >= qs.lo(j) && x <= qs.hi(j))) {
    return absl::OutOfRangeError(absl::StrCat(
        "value ", x, " outside [", qs.lo(j), ", ", qs.hi(j), "] at ", j));
  }
  const int top = qs.levels - 1;
  if (x >= qs.Knob(j, top)) return Bracket{top, 1.0};
  const double step = (qs.hi(j) - qs.lo(j)) / top;
  int tau = static_cast<int>(std::floor((x - qs.lo(j)) / step));
  tau = std::clamp(tau, 0, top - 1);
  while (tau > 0 && x < qs.Knob(j, tau)) --tau;
  while (tau < top - 1 && x >= qs.Knob(j, tau + 1)) ++tau;
  const double c0 = qs.Knob(j, tau);
  if (x == c0) return Bracket{tau, 1.0};
  const double c1 = qs.Knob(j, tau + 1);
  return Bracket{tau, (c1 - x) / (c1 - c0)};
}

}  // namespace

absl::StatusOr<CoordinateDistribution> CoordinateOutput(
    const QuantizerState& qs, int j, double x) {
  auto b = FindBracket(qs, j, x);
  if (!b.ok()) return b.status();
  CoordinateDistribution out;
  out.atoms.reserve(2);
  const int tau = b->lower;
  out.atoms.push_back({static_cast<uint32_t>(tau), qs.Knob(j, tau), b->p_down});
  if (b->p_down < 1.0) {
    out.atoms.push_back(
        {static_cast<uint32_t>(tau + 1), qs.Knob(j, tau + 1), 1.0 - b->p_down});
  }
  return out;
}

absl::StatusOr<std::vector<CoordinateDistribution>> OutputDistribution(
    const ModelVec& w, const QuantizerState& qs) {
  if (w.size() != qs.lo.size()) {
    return absl::InvalidArgumentError("dimension mismatch");
  }
  std::vector<CoordinateDistribution> out;
  out.reserve(w.size());
  for (int j = 0; j < qs.dim(); ++j) {
    auto c = CoordinateOutput(qs, j, w(j));
    if (!c.ok()) return c.status();
    out.push_back(*std::move(c));
  }
  return out;
}

absl::StatusOr<QuantizedVector> Quantize(const ModelVec& w,
                                         const QuantizerState& qs,
                                         std::span<const double> uniforms) {
  if (w.size() != qs.lo.size() ||
      uniforms.size() != static_cast<size_t>(w.size())) {
    return absl::InvalidArgumentError("dimension mismatch");
  }
  QuantizedVector q;
  q.indices.resize(w.size());
  for (int j = 0; j < qs.dim(); ++j) {
    auto b = FindBracket(qs, j, w(j));
    if (!b.ok()) return b.status();
    q.indices[j] = static_cast<uint32_t>(
        uniforms[j] < b->p_down ? b->lower : b->lower + 1);
  }
  return q;
}

ModelVec Dequantize(const QuantizedVector& q, const QuantizerState& qs) {
  ModelVec v(qs.dim());
  for (int j = 0; j < qs.dim(); ++j) {
    v(j) = qs.Knob(j, static_cast<int>(q.indices[j]));
  }
  return v;
}

double TotalVariation(const CoordinateDistribution& a,
                      const CoordinateDistribution& b) {
  std::map<double, double> diff;
  for (const auto& x : a.atoms) diff[x.value] += x.prob;
  for (const auto& x : b.atoms) diff[x.value] -= x.prob;
  double tv = 0.0;
  for (const auto& [v, p] : diff) tv += std::abs(p);
  return 0.5 * tv;
}

absl::StatusOr<QuantizerState> ShrinkInterval(const ModelVec& q, double pi_t,
                                              double a_max_k, int levels) {
  const double half = 0.5 * pi_t * a_max_k;
  if (!(half > 0.0)) {
    return absl::InvalidArgumentError("interval width must be positive");
  }
  return MakeQuantizerState(q.array() - half, q.array() + half, levels);
}

absl::StatusOr<double> ComputePiT(double epsilon, double lambda2_u,
                                  double w_tilde_max) {
  if (!(lambda2_u < 1.0)) {
    return absl::InvalidArgumentError("lambda2(U) must be < 1");
  }
  const double et = std::max(1.0, epsilon);
  return 8.0 * (epsilon + et + et * w_tilde_max) / (1.0 - lambda2_u);
}

double StaticErrorBound(const QuantizerState& qs) {
  return std::sqrt(static_cast<double>(qs.dim())) * qs.MaxWidth() /
         (qs.levels - 1);
}

double DynamicErrorBound(double pi_t, int bits, double a_max_k, int dim) {
  return std::sqrt(static_cast<double>(dim)) * pi_t * a_max_k /
         (std::ldexp(1.0, bits) - 1.0);
}

double DpDelta(double c4, double pi_t, double a_max_k, int levels, int bits) {
  const double first = c4 * (levels - 1) / (pi_t * a_max_k);
  const double second = (levels - 1) / (std::ldexp(1.0, bits) - 1.0);
  return std::min(first, second);
}

bool BitBudgetOk(int bits, int M, int dim, double pi_t) {
  return bits <= std::log2(std::sqrt(static_cast<double>(M) * dim) * pi_t + 1);
}

size_t HeaderSize(int dim) { return 24 + 16 * static_cast<size_t>(dim); }

size_t EncodedSize(int dim, int bits) {
  return HeaderSize(dim) +
         (static_cast<size_t>(bits) * static_cast<size_t>(dim) + 7) / 8;
}

std::vector<uint8_t> Encode(const QuantizedVector& q,
                            const QuantizerState& qs) {
  const int d = qs.dim();
  std::vector<uint8_t> out(EncodedSize(d, qs.bits), 0);
  uint8_t* p = out.data();
  PutU64(p, static_cast<uint64_t>(d));
  PutU64(p + 8, static_cast<uint64_t>(qs.levels));
  PutU64(p + 16, static_cast<uint64_t>(qs.bits));
  p += 24;
  for (int j = 0; j < d; ++j, p += 8) {
    PutU64(p, std::bit_cast<uint64_t>(qs.lo(j)));
  }
  for (int j = 0; j < d; ++j, p += 8) {
    PutU64(p, std::bit_cast<uint64_t>(qs.hi(j)));
  }
  // MSB-first bit writer; the tail is zero-padded.
  uint64_t acc = 0;
  int have = 0;
  for (int j = 0; j < d; ++j) {
    acc = (acc << qs.bits) | q.indices[j];
    have += qs.bits;
    while (have >= 8) {
      *p++ = static_cast<uint8_t>(acc >> (have - 8));
      have -= 8;
    }
  }
  if (have > 0) *p = static_cast<uint8_t>(acc << (8 - have));
  return out;
}

absl::StatusOr<QuantizedVector> Decode(std::span<const uint8_t> bytes,
                                       const QuantizerState& qs) {
  auto h = ParseHeader(bytes);
  if (!h.ok()) return h.status();
  if (static_cast<int>(h->d) != qs.dim() ||
      static_cast<int>(h->l) != qs.levels ||
      static_cast<int>(h->b) != qs.bits) {
    return absl::DataLossError("header mismatch: d, l or B");
  }
  for (int j = 0; j < qs.dim(); ++j) {
    if (std::bit_cast<uint64_t>(h->lo[j]) !=
            std::bit_cast<uint64_t>(qs.lo(j)) ||
        std::bit_cast<uint64_t>(h->hi[j]) !=
            std::bit_cast<uint64_t>(qs.hi(j))) {
      return absl::DataLossError(
          absl::StrCat("header mismatch: interval at coordinate ", j));
    }
  }
  return UnpackPayload(bytes, *h);
}

absl::StatusOr<std::pair<QuantizerState, QuantizedVector>> DecodeStandalone(
    std::span<const uint8_t> bytes) {
  auto h = ParseHeader(bytes);
  if (!h.ok()) return h.status();
  const int d = static_cast<int>(h->d);
  auto qs = MakeQuantizerState(Eigen::Map<const ModelVec>(h->lo.data(), d),
                               Eigen::Map<const ModelVec>(h->hi.data(), d),
                               static_cast<int>(h->l));
  if (!qs.ok()) return absl::DataLossError(qs.status().message());
  auto q = UnpackPayload(bytes, *h);
  if (!q.ok()) return q.status();
  return std::make_pair(*std::move(qs), *std::move(q));
}

}  // namespace fedsplit
