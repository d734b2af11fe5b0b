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

#include <cmath>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"

namespace fedsplit {
namespace {

using ::fedsplit::testing::LoadFixture;
using ::fedsplit::testing::Vec;

QuantizerState Unit(int levels, int d = 1) {
  return *MakeQuantizerState(ModelVec::Zero(d), ModelVec::Ones(d), levels);
}

std::vector<uint8_t> FromHex(const std::string& hex) {
  std::vector<uint8_t> out;
  for (size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

TEST(MakeQuantizerState, BitsAndValidation) {
  EXPECT_EQ(BitsForLevels(2), 1);
  EXPECT_EQ(BitsForLevels(5), 3);
  EXPECT_EQ(BitsForLevels(256), 8);
  EXPECT_EQ(BitsForLevels(257), 9);
  const QuantizerState qs = Unit(5);
  EXPECT_EQ(qs.bits, 3);
  EXPECT_DOUBLE_EQ(qs.Knob(0, 1), 0.25);
  EXPECT_FALSE(MakeQuantizerState(ModelVec::Ones(1), ModelVec::Ones(1), 4).ok());
  EXPECT_FALSE(MakeQuantizerState(ModelVec::Zero(1), ModelVec::Ones(1), 1).ok());
  EXPECT_FALSE(MakeQuantizerState(ModelVec::Zero(2), ModelVec::Ones(1), 4).ok());
}

TEST(CoordinateOutput, MatchesOracleLaw) {
  const auto fx = LoadFixture("quantizer.json");
  auto law = CoordinateOutput(Unit(5), 0, 0.3);
  ASSERT_OK(law);
  const auto expect = fx["law_0_3"];
  ASSERT_EQ(law->atoms.size(), expect.size());
  for (size_t a = 0; a < expect.size(); ++a) {
    EXPECT_NEAR(law->atoms[a].value, expect[a][0].get<double>(), 1e-15);
    EXPECT_NEAR(law->atoms[a].prob, expect[a][1].get<double>(), 1e-15);
  }
}

TEST(CoordinateOutput, KnobsAndBounds) {
  const QuantizerState qs = Unit(5);
  for (double x : {0.0, 0.25, 0.5, 1.0}) {
    auto law = CoordinateOutput(qs, 0, x);
    ASSERT_OK(law);
    ASSERT_EQ(law->atoms.size(), 1u);
    EXPECT_DOUBLE_EQ(law->atoms[0].value, x);
    EXPECT_DOUBLE_EQ(law->atoms[0].prob, 1.0);
  }
  auto out = CoordinateOutput(qs, 0, 1.5);
  ASSERT_FALSE(out.ok());
  EXPECT_EQ(out.status().code(), absl::StatusCode::kOutOfRange);
}

TEST(TotalVariation, NeighbouringInputs) {
  const auto fx = LoadFixture("quantizer.json");
  const QuantizerState qs = Unit(5);
  auto a = CoordinateOutput(qs, 0, 0.3);
  auto b = CoordinateOutput(qs, 0, 0.35);
  ASSERT_OK(a);
  ASSERT_OK(b);
  EXPECT_NEAR(TotalVariation(*a, *b), fx["tv_0_3_0_35"].get<double>(), 1e-15);
  EXPECT_DOUBLE_EQ(TotalVariation(*a, *a), 0.0);
}

TEST(Quantize, UniformsSelectAtoms) {
  const QuantizerState qs = Unit(5);
  ModelVec w(1);
  w << 0.3;
  // p_down = 0.8: u below it keeps the lower knob.
  const std::vector<double> low = {0.79}, high = {0.8};
  auto q1 = Quantize(w, qs, low);
  auto q2 = Quantize(w, qs, high);
  ASSERT_OK(q1);
  ASSERT_OK(q2);
  EXPECT_EQ(q1->indices[0], 1u);
  EXPECT_EQ(q2->indices[0], 2u);
  EXPECT_DOUBLE_EQ(Dequantize(*q2, qs)(0), 0.5);
  const std::vector<double> short_u = {};
  EXPECT_FALSE(Quantize(w, qs, short_u).ok());
}

TEST(Quantize, MonteCarloMeanIsInput) {
  const QuantizerState qs = Unit(5);
  ModelVec w(1);
  w << 0.3;
  SplitMix64 rng(12);
  constexpr int kDraws = 100000;
  double sum = 0.0;
  for (int s = 0; s < kDraws; ++s) {
    auto q = Quantize(w, qs, rng);
    ASSERT_OK(q);
    sum += Dequantize(*q, qs)(0);
  }
  EXPECT_NEAR(sum / kDraws, 0.3, 4.0 * std::sqrt(0.0625 * 0.16 / kDraws));
}

TEST(ErrorBounds, Formulas) {
  const auto fx = LoadFixture("quantizer.json");
  EXPECT_NEAR(StaticErrorBound(Unit(5, 4)),
              fx["static_bound_d4_w1_l5"].get<double>(), 1e-15);
  EXPECT_NEAR(DynamicErrorBound(24.0, 3, 0.1, 1),
              fx["dynamic_bound"].get<double>(), 1e-15);
  auto pi0 = ComputePiT(0.5, 0.5, 0.0);
  auto pi1 = ComputePiT(0.5, 0.5, 1.0);
  ASSERT_OK(pi0);
  ASSERT_OK(pi1);
  EXPECT_NEAR(*pi0, fx["pi_w0"].get<double>(), 1e-12);
  EXPECT_NEAR(*pi1, fx["pi_w1"].get<double>(), 1e-12);
  EXPECT_FALSE(ComputePiT(0.5, 1.0, 0.0).ok());
  EXPECT_NEAR(DpDelta(0.1, 1.0, 1.0, 5, 3), fx["dp_delta"].get<double>(),
              1e-15);
}

TEST(ShrinkInterval, CentredOnLastValue) {
  ModelVec q(1);
  q << 0.0;
  auto qs = ShrinkInterval(q, 2.0, 0.5, 5);
  ASSERT_OK(qs);
  EXPECT_DOUBLE_EQ(qs->lo(0), -0.5);
  EXPECT_DOUBLE_EQ(qs->hi(0), 0.5);
  EXPECT_FALSE(ShrinkInterval(q, 0.0, 0.5, 5).ok());
}

TEST(BitBudget, Gate) {
  // log2(sqrt(4) * 24 + 1) = log2(49) ~ 5.61.
  EXPECT_TRUE(BitBudgetOk(5, 2, 2, 24.0));
  EXPECT_FALSE(BitBudgetOk(6, 2, 2, 24.0));
}

TEST(Codec, GoldenBytes) {
  const auto fx = LoadFixture("quantizer.json");
  for (const auto& c : fx["codec"]) {
    const auto idx = c["indices"].get<std::vector<uint32_t>>();
    auto qs = MakeQuantizerState(Vec(c["lo"].get<std::vector<double>>()),
                                 Vec(c["hi"].get<std::vector<double>>()),
                                 c["levels"].get<int>());
    ASSERT_OK(qs);
    ASSERT_EQ(qs->bits, c["bits"].get<int>());
    const QuantizedVector q{idx};
    const auto bytes = Encode(q, *qs);
    EXPECT_EQ(bytes, FromHex(c["bytes_hex"]));
    const auto payload = FromHex(c["payload_hex"]);
    ASSERT_EQ(bytes.size(), HeaderSize(qs->dim()) + payload.size());
    EXPECT_TRUE(std::equal(payload.begin(), payload.end(),
                           bytes.begin() + HeaderSize(qs->dim())));
    auto back = Decode(bytes, *qs);
    ASSERT_OK(back);
    EXPECT_EQ(back->indices, idx);
    auto standalone = DecodeStandalone(bytes);
    ASSERT_OK(standalone);
    EXPECT_EQ(standalone->first.lo, qs->lo);
    EXPECT_EQ(standalone->second.indices, idx);
  }
}

TEST(Codec, ThreeIndicesPackToTwoBytes) {
  const QuantizerState qs = Unit(5, 3);
  const auto bytes = Encode(QuantizedVector{{0, 4, 2}}, qs);
  ASSERT_EQ(bytes.size(), EncodedSize(3, 3));
  EXPECT_EQ(bytes[HeaderSize(3)], 0x11);
  EXPECT_EQ(bytes[HeaderSize(3) + 1], 0x00);
}

TEST(Codec, RejectsCorruptInput) {
  const QuantizerState qs = Unit(5, 3);
  const auto good = Encode(QuantizedVector{{0, 4, 2}}, qs);
  auto truncated = good;
  truncated.pop_back();
  EXPECT_EQ(Decode(truncated, qs).status().code(), absl::StatusCode::kDataLoss);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_FALSE(Decode(trailing, qs).ok());
  auto padding = good;
  padding.back() |= 0x01;
  EXPECT_FALSE(Decode(padding, qs).ok());
  auto index = good;
  // First index becomes 7 >= l.
  index[HeaderSize(3)] |= 0xe0;
  EXPECT_FALSE(Decode(index, qs).ok());
  auto header = good;
  header[8] = 6;
  EXPECT_FALSE(Decode(header, qs).ok());
  const QuantizerState other = Unit(6, 3);
  EXPECT_FALSE(Decode(good, other).ok());
  EXPECT_FALSE(DecodeStandalone(std::vector<uint8_t>(10, 0)).ok());
}

}  // namespace
}  // namespace fedsplit
