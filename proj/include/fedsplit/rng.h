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

#ifndef FEDSPLIT_RNG_H_
#define FEDSPLIT_RNG_H_

#include <cstdint>
#include <random>

namespace fedsplit {

using Rng = std::mt19937_64;

// Independent randomness sources of one run.
enum class Purpose : uint64_t {
  kProblem = 1,
  kSampling = 2,
  kSgd = 3,
  kSplit = 4,
  kQuantize = 5,
  kLdpNoise = 6,
  kAudit = 7,
  kSweep = 8,
};

// Derives a child seed from (root, purpose, t, k, slot). Distinct keys give
// statistically independent streams.
uint64_t DeriveSeed(uint64_t root, Purpose purpose, uint64_t t = 0,
                    uint64_t k = 0, uint64_t slot = 0);

inline Rng MakeRng(uint64_t root, Purpose purpose, uint64_t t = 0,
                   uint64_t k = 0, uint64_t slot = 0) {
  return Rng(DeriveSeed(root, purpose, t, k, slot));
}

// SplitMix64 engine. Cheap to construct, used for the short per-round
// quantization streams where seeding a Mersenne Twister would dominate.
class SplitMix64 {
 public:
  using result_type = uint64_t;
  explicit SplitMix64(uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  uint64_t state_;
};

// Uniform draw on [0, 1).
template <typename Engine>
double Uniform01(Engine& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace fedsplit

#endif  // FEDSPLIT_RNG_H_
