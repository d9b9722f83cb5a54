// Copyright 2026 The hiiforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "hiiforge/core/hashing.hpp"
#include "hiiforge/math/dpo.hpp"

namespace hiiforge::math {
namespace {

LossSample make_sample(double pp, double rp, double pm, double rm, std::optional<std::string> id = {}) {
  return LossSample{pp, rp, pm, rm, std::move(id)};
}

TEST(Scalar, SoftplusAndSigmoid) {
  EXPECT_DOUBLE_EQ(softplus(0.0), std::log(2.0));
  EXPECT_DOUBLE_EQ(softplus(1000.0), 1000.0);
  EXPECT_GE(softplus(-1000.0), 0.0);
  EXPECT_NEAR(softplus(-40.0), std::exp(-40.0), 1e-30);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  for (double x : {-30.0, -2.5, 0.1, 7.0}) EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-15);
}

TEST(Dpo, WorkedExample) {
  // Policy-reference margins +1 and -1 at beta 0.1 give z = 0.2.
  const std::vector<LossSample> batch{make_sample(-4.0, -5.0, -7.0, -6.0)};
  const auto r = dpo_loss(batch, 0.1);
  EXPECT_NEAR(r.z[0], 0.2, 1e-15);
  EXPECT_NEAR(r.loss, 0.598139, 1e-6);
  EXPECT_NEAR(r.loss, std::log1p(std::exp(-0.2)), 1e-15);
}

TEST(Dpo, ZeroMarginGivesLn2AndHalfBetaGradient) {
  const std::vector<LossSample> batch{make_sample(-3, -3, -5, -5)};
  const auto r = dpo_loss(batch, 0.1);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(r.grad[0].d_pol_plus, -0.05, 1e-15);
  EXPECT_NEAR(r.grad[0].d_pol_minus, 0.05, 1e-15);
}

TEST(Dpo, UniformMeanOverBatch) {
  const std::vector<LossSample> batch{make_sample(0, 0, 0, 0), make_sample(-1, -2, -3, -1), make_sample(5, 1, 1, 5)};
  const auto r = dpo_loss(batch, 0.5);
  EXPECT_NEAR(r.loss, (r.per_sample[0] + r.per_sample[1] + r.per_sample[2]) / 3.0, 1e-15);
  EXPECT_NEAR(r.grad[1].d_pol_plus * 3.0, -0.5 * sigmoid(-r.z[1]), 1e-15);
}

TEST(Dpo, StableAtExtremeMargins) {
  for (double m : {-1e6, -1e3, -50.0, 50.0, 1e3, 1e6}) {
    const std::vector<LossSample> batch{make_sample(m, 0, 0, 0)};
    const auto r = dpo_loss(batch, 1.0);
    ASSERT_TRUE(std::isfinite(r.loss)) << m;
    ASSERT_TRUE(std::isfinite(r.grad[0].d_pol_plus)) << m;
    if (m < 0) {
      EXPECT_NEAR(r.loss, -m, 1e-9 * std::abs(m));
      EXPECT_NEAR(r.grad[0].d_pol_plus, -1.0, 1e-12);
    } else {
      EXPECT_GE(r.loss, 0.0);
      EXPECT_LT(r.loss, 1e-20);
    }
  }
}

TEST(Dpo, RejectsBadInput) {
  const std::vector<LossSample> empty;
  EXPECT_THROW(dpo_loss(empty, 0.1), ValidationError);
  const std::vector<LossSample> ok{make_sample(0, 0, 0, 0)};
  EXPECT_THROW(dpo_loss(ok, 0.0), ValidationError);
  EXPECT_THROW(dpo_loss(ok, -1.0), ValidationError);
  EXPECT_THROW(dpo_loss(ok, std::nan("")), ValidationError);
  const std::vector<LossSample> bad{make_sample(0, 0, 0, 0), make_sample(0, std::numeric_limits<double>::infinity(), 0, 0)};
  try {
    dpo_loss(bad, 0.1);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "batch[1].lp_ref_plus");
  }
}

TEST(HiiDpo, RequiresMaskedImageIds) {
  const std::vector<LossSample> good{make_sample(-1, -1, -2, -2, "img01#sink#2")};
  EXPECT_NEAR(hii_dpo_loss(good, 0.1).loss, std::log(2.0), 1e-15);
  const std::vector<LossSample> missing{make_sample(-1, -1, -2, -2)};
  EXPECT_THROW(hii_dpo_loss(missing, 0.1), ValidationError);
  const std::vector<LossSample> plain{make_sample(-1, -1, -2, -2, "img01")};
  EXPECT_THROW(hii_dpo_loss(plain, 0.1), ValidationError);
  EXPECT_NO_THROW(dpo_loss(missing, 0.1));
  EXPECT_NO_THROW(vca_loss(plain, 0.1));
}

TEST(Objective, ParsesNames) {
  for (auto o : {Objective::kDpo, Objective::kHiiDpo, Objective::kVca}) EXPECT_EQ(parse_objective(to_string(o)), o);
  EXPECT_THROW(parse_objective("ppo"), ValidationError);
}

TEST(BradleyTerry, SymmetricAndBounded) {
  EXPECT_DOUBLE_EQ(bt_probability(1.0, 1.0), 0.5);
  EXPECT_EQ(bt_probability(1000.0, 0.0), 1.0);
  EXPECT_GE(bt_probability(-1000.0, 0.0), 0.0);
  SplitMix64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const double a = (rng.uniform() - 0.5) * 40.0;
    const double b = (rng.uniform() - 0.5) * 40.0;
    ASSERT_NEAR(bt_probability(a, b) + bt_probability(b, a), 1.0, 1e-12);
    ASSERT_NEAR(bt_probability(a, b), sigmoid(a - b), 1e-14);
  }
  EXPECT_THROW(bt_probability(std::nan(""), 0.0), ValidationError);
}

TEST(ImplicitReward, ScalesTheLogRatio) {
  EXPECT_DOUBLE_EQ(implicit_reward(0.1, -3.0, -5.0), 0.2);
  EXPECT_THROW(implicit_reward(0.0, 0.0, 0.0), ValidationError);
}

TEST(Posterior, AddsLogOddsAndLikelihoodRatio) {
  // Prior 0.2, likelihoods 0.9 / 0.3: posterior 0.18 / (0.18 + 0.24).
  const double lo = posterior_log_odds(std::log(0.2 / 0.8), std::log(0.9 / 0.3));
  EXPECT_NEAR(sigmoid(lo), 0.18 / 0.42, 1e-15);
  EXPECT_THROW(posterior_log_odds(std::numeric_limits<double>::infinity(), 0.0), ValidationError);
}

TEST(GradCheck, AnalyticMatchesFiniteDifferences) {
  SplitMix64 rng(99);
  for (auto o : {Objective::kDpo, Objective::kHiiDpo, Objective::kVca}) {
    std::vector<LossSample> batch;
    for (int i = 0; i < 16; ++i) {
      auto u = [&] { return -20.0 * rng.uniform(); };
      batch.push_back(make_sample(u(), u(), u(), u(), "img" + std::to_string(i) + "#cup#1"));
    }
    const auto g = check_gradients(o, batch, 0.1);
    EXPECT_EQ(g.checked, 32u);
    EXPECT_LT(g.max_rel_error, 1e-6) << to_string(o);
  }
}

TEST(Json, ReportShape) {
  const std::vector<LossSample> batch{make_sample(-3, -3, -5, -5)};
  const Json j = to_json(dpo_loss(batch, 0.1), Objective::kDpo, 0.1);
  EXPECT_EQ(j["objective"], "dpo");
  EXPECT_EQ(j["n"], 1);
  EXPECT_NEAR(j["grad"][0]["d_lp_pol_minus"].get<double>(), 0.05, 1e-15);
}

}  // namespace
}  // namespace hiiforge::math
