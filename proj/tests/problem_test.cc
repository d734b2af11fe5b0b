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

#include "fedsplit/problem.h"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"

namespace fedsplit {
namespace {

using ::fedsplit::testing::LoadFixture;
using ::fedsplit::testing::Vec;

ProblemOptions UnitOptions() {
  ProblemOptions o;
  o.mu = 1.0;
  o.L = 1.0;
  o.center = 1.0;
  o.samples_per_client = 4;
  o.sample_noise = 0.0;
  return o;
}

TEST(MakeQuadraticProblem, TwoClientsLineUpAroundCenter) {
  auto losses = MakeQuadraticProblem(2, 1, 2.0, 0, UnitOptions());
  ASSERT_OK(losses);
  EXPECT_NEAR((*losses)[0].b(0), 0.0, 1e-15);
  EXPECT_NEAR((*losses)[1].b(0), 2.0, 1e-15);
  EXPECT_DOUBLE_EQ((*losses)[0].p, 0.5);
  EXPECT_NEAR((*losses)[0].a(0, 0), 1.0, 1e-15);
}

TEST(MakeQuadraticProblem, SpectrumHitsBothEnds) {
  ProblemOptions o;
  o.mu = 0.2;
  o.L = 0.4;
  auto losses = MakeQuadraticProblem(5, 6, 1.0, 3, o);
  ASSERT_OK(losses);
  for (const auto& loss : *losses) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(loss.a);
    EXPECT_NEAR(es.eigenvalues().minCoeff(), 0.2, 1e-12);
    EXPECT_NEAR(es.eigenvalues().maxCoeff(), 0.4, 1e-12);
    ModelVec mean = ModelVec::Zero(6);
    for (const auto& off : loss.offsets) mean += off;
    EXPECT_LT(mean.norm(), 1e-12);
  }
}

TEST(MakeQuadraticProblem, RejectsBadArguments) {
  EXPECT_FALSE(MakeQuadraticProblem(0, 2, 1.0, 0).ok());
  EXPECT_FALSE(MakeQuadraticProblem(2, 0, 1.0, 0).ok());
  EXPECT_FALSE(MakeQuadraticProblem(2, 2, -1.0, 0).ok());
  ProblemOptions o;
  o.mu = 2.0;
  o.L = 1.0;
  EXPECT_FALSE(MakeQuadraticProblem(2, 2, 1.0, 0, o).ok());
}

TEST(MakeQuadraticProblem, SameSeedSameProblem) {
  auto a = MakeQuadraticProblem(4, 3, 1.5, 9);
  auto b = MakeQuadraticProblem(4, 3, 1.5, 9);
  ASSERT_OK(a);
  ASSERT_OK(b);
  for (size_t i = 0; i < a->size(); ++i) {
    EXPECT_EQ((*a)[i].a, (*b)[i].a);
    EXPECT_EQ((*a)[i].b, (*b)[i].b);
  }
}

TEST(GlobalOptimum, ClosedFormTwoClients) {
  auto losses = MakeQuadraticProblem(2, 1, 2.0, 0, UnitOptions());
  ASSERT_OK(losses);
  auto opt = GlobalOptimum(*losses);
  ASSERT_OK(opt);
  EXPECT_NEAR(opt->w_star(0), 1.0, 1e-15);
  EXPECT_NEAR(opt->f_star, 0.5, 1e-15);
  EXPECT_NEAR(HeterogeneityGamma(*losses), 0.5, 1e-15);
}

TEST(GlobalOptimum, IdenticalClientsHaveNoHeterogeneity) {
  auto losses = MakeQuadraticProblem(3, 2, 0.0, 1, UnitOptions());
  ASSERT_OK(losses);
  EXPECT_NEAR(HeterogeneityGamma(*losses), 0.0, 1e-15);
}

TEST(GlobalOptimum, MatchesNumericMinimizer) {
  const auto fx = LoadFixture("problem.json");
  auto losses = ProblemFromJson(fx["problem"]);
  ASSERT_OK(losses);
  auto opt = GlobalOptimum(*losses);
  ASSERT_OK(opt);
  const ModelVec expect = Vec(fx["w_star"].get<std::vector<double>>());
  EXPECT_LT((opt->w_star - expect).norm(), 1e-6);
  EXPECT_NEAR(opt->f_star, fx["f_star"].get<double>(), 1e-10);
  EXPECT_NEAR(HeterogeneityGamma(*losses), fx["gamma"].get<double>(), 1e-10);
}

TEST(SpreadForGamma, HitsTarget) {
  ProblemOptions o;
  o.mu = 0.2;
  o.L = 0.4;
  auto spread = SpreadForGamma(20, 10, 0.5, 0, o);
  ASSERT_OK(spread);
  auto losses = MakeQuadraticProblem(20, 10, *spread, 0, o);
  ASSERT_OK(losses);
  EXPECT_NEAR(HeterogeneityGamma(*losses), 0.5, 1e-9);
}

TEST(ValidateLosses, RejectsMalformed) {
  auto losses = MakeQuadraticProblem(2, 2, 1.0, 0);
  ASSERT_OK(losses);
  auto bad = *losses;
  bad[0].p = 0.9;
  EXPECT_FALSE(ValidateLosses(bad).ok());
  bad = *losses;
  bad[1].a(0, 1) += 1.0;
  EXPECT_FALSE(ValidateLosses(bad).ok());
  bad = *losses;
  bad[0].a = -bad[0].a;
  EXPECT_FALSE(ValidateLosses(bad).ok());
  bad = *losses;
  bad[0].batch_size = 0;
  EXPECT_FALSE(ValidateLosses(bad).ok());
}

TEST(StochasticGradient, UnbiasedOverBatches) {
  ProblemOptions o;
  o.sample_noise = 1.0;
  o.samples_per_client = 20;
  o.batch_size = 2;
  auto losses = MakeQuadraticProblem(1, 3, 0.0, 5, o);
  ASSERT_OK(losses);
  const auto& loss = (*losses)[0];
  const ModelVec w = ModelVec::Constant(3, 0.7);
  Rng rng = MakeRng(17, Purpose::kSgd);
  constexpr int kDraws = 100000;
  ModelVec mean = ModelVec::Zero(3);
  for (int s = 0; s < kDraws; ++s) {
    auto g = StochasticGradient(loss, w, DrawBatch(loss, rng));
    ASSERT_OK(g);
    mean += *g;
  }
  mean /= kDraws;
  const double sigma = std::sqrt(GradientVariance(loss));
  EXPECT_LE((mean - FullGradient(loss, w)).norm(),
            4.0 * sigma / std::sqrt(static_cast<double>(kDraws)));
}

TEST(StochasticGradient, RejectsBadBatch) {
  auto losses = MakeQuadraticProblem(1, 2, 0.0, 0);
  ASSERT_OK(losses);
  const ModelVec w = ModelVec::Zero(2);
  EXPECT_FALSE(StochasticGradient((*losses)[0], w, {}).ok());
  const std::vector<int> out_of_range = {1000};
  EXPECT_FALSE(StochasticGradient((*losses)[0], w, out_of_range).ok());
}

TEST(ComputeConstants, BoundsAndOptimum) {
  ProblemOptions o;
  o.mu = 0.2;
  o.L = 0.4;
  auto losses = MakeQuadraticProblem(6, 4, 1.0, 2, o);
  ASSERT_OK(losses);
  auto c = ComputeConstants(*losses, 10.0);
  ASSERT_OK(c);
  EXPECT_NEAR(c->mu, 0.2, 1e-12);
  EXPECT_NEAR(c->L, 0.4, 1e-12);
  EXPECT_EQ(c->sigma.size(), 6u);
  EXPECT_GT(c->G, 0.0);
  EXPECT_NEAR(c->w_max_norm, c->w_star.norm() + 10.0, 1e-12);
  EXPECT_FALSE(ComputeConstants(*losses, 0.0).ok());
}

TEST(ProblemJson, RoundTrip) {
  auto losses = MakeQuadraticProblem(3, 2, 1.0, 4);
  ASSERT_OK(losses);
  auto back = ProblemFromJson(ProblemToJson(*losses));
  ASSERT_OK(back);
  ASSERT_EQ(back->size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ((*back)[i].a, (*losses)[i].a);
    EXPECT_EQ((*back)[i].b, (*losses)[i].b);
    EXPECT_EQ((*back)[i].offsets.size(), (*losses)[i].offsets.size());
  }
  nlohmann::json broken = ProblemToJson(*losses);
  broken["clients"][0]["b"] = {1.0};
  EXPECT_FALSE(ProblemFromJson(broken).ok());
}

}  // namespace
}  // namespace fedsplit
