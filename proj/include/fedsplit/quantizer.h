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

#ifndef FEDSPLIT_QUANTIZER_H_
#define FEDSPLIT_QUANTIZER_H_

#include <concepts>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "fedsplit/problem.h"
#include "fedsplit/rng.h"

namespace fedsplit {

// Per-coordinate interval [lo_j, hi_j] with l uniformly spaced knobs.
struct QuantizerState {
  ModelVec lo;
  ModelVec hi;
  int levels = 2;
  int bits = 1;

  int dim() const { return static_cast<int>(lo.size()); }
  double Knob(int j, int tau) const;
  double MaxWidth() const;
};

struct QuantizedVector {
  std::vector<uint32_t> indices;
};

struct Atom {
  uint32_t index = 0;
  double value = 0.0;
  double prob = 0.0;
};

// One or two atoms; probabilities sum to 1.
struct CoordinateDistribution {
  std::vector<Atom> atoms;
};

int BitsForLevels(int levels);

absl::StatusOr<QuantizerState> MakeQuantizerState(const ModelVec& lo,
                                                  const ModelVec& hi,
                                                  int levels);

absl::StatusOr<CoordinateDistribution> CoordinateOutput(
    const QuantizerState& qs, int j, double x);
absl::StatusOr<std::vector<CoordinateDistribution>> OutputDistribution(
    const ModelVec& w, const QuantizerState& qs);

// One uniform per coordinate: index moves up iff u >= p_down.
absl::StatusOr<QuantizedVector> Quantize(const ModelVec& w,
                                         const QuantizerState& qs,
                                         std::span<const double> uniforms);

template <std::uniform_random_bit_generator Engine>
absl::StatusOr<QuantizedVector> Quantize(const ModelVec& w,
                                         const QuantizerState& qs,
                                         Engine& rng) {
  std::vector<double> u(w.size());
  for (double& x : u) x = Uniform01(rng);
  return Quantize(w, qs, u);
}
ModelVec Dequantize(const QuantizedVector& q, const QuantizerState& qs);

double TotalVariation(const CoordinateDistribution& a,
                      const CoordinateDistribution& b);

// Interval q +/- pi_t a_max_k / 2 per coordinate.
absl::StatusOr<QuantizerState> ShrinkInterval(const ModelVec& q, double pi_t,
                                              double a_max_k, int levels);

// 8(eps + eps~ + eps~ W~)/(1 - lambda2) with eps~ = max(1, eps).
absl::StatusOr<double> ComputePiT(double epsilon, double lambda2_u,
                                  double w_tilde_max);

double StaticErrorBound(const QuantizerState& qs);
double DynamicErrorBound(double pi_t, int bits, double a_max_k, int dim);

double DpDelta(double c4, double pi_t, double a_max_k, int levels, int bits);

// B <= log2(sqrt(M d) pi_t + 1).
bool BitBudgetOk(int bits, int M, int dim, double pi_t);

// Wire format: d, l, B as u64 little-endian, then lo[d], hi[d] as f64
// little-endian, then indices packed B bits each, MSB first, zero padded.
std::vector<uint8_t> Encode(const QuantizedVector& q, const QuantizerState& qs);
size_t EncodedSize(int dim, int bits);
size_t HeaderSize(int dim);

// Decodes against the receiver's interval; header must match it exactly.
absl::StatusOr<QuantizedVector> Decode(std::span<const uint8_t> bytes,
                                       const QuantizerState& qs);
// Decodes the interval from the header as well.
absl::StatusOr<std::pair<QuantizerState, QuantizedVector>> DecodeStandalone(
    std::span<const uint8_t> bytes);

}  // namespace fedsplit

#endif  // FEDSPLIT_QUANTIZER_H_
