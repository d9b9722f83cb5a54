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

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/json_codec.hpp"
#include "hiiforge/core/records.hpp"

namespace hiiforge::math {

inline double check_finite(double v, std::string_view field) {
  if (!std::isfinite(v)) throw ValidationError(std::string(field), "must be finite");
  return v;
}

inline double check_beta(double beta) {
  check_finite(beta, "beta");
  if (!(beta > 0.0)) throw ValidationError("beta", "must be > 0");
  return beta;
}

// log(1 + e^x) without overflow or cancellation.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double implicit_reward(double beta, double lp_pol, double lp_ref) {
  check_beta(beta);
  check_finite(lp_pol, "lp_pol");
  check_finite(lp_ref, "lp_ref");
  return beta * (lp_pol - lp_ref);
}

// Bradley-Terry probability that the first response is preferred.
inline double bt_probability(double r_plus, double r_minus) {
  check_finite(r_plus, "r_plus");
  check_finite(r_minus, "r_minus");
  return std::exp(-softplus(r_minus - r_plus));
}

inline double posterior_log_odds(double prior_log_odds, double likelihood_log_ratio) {
  check_finite(prior_log_odds, "prior_log_odds");
  check_finite(likelihood_log_ratio, "likelihood_log_ratio");
  return prior_log_odds + likelihood_log_ratio;
}

enum class Objective { kDpo, kHiiDpo, kVca };

inline std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::kDpo: return "dpo";
    case Objective::kHiiDpo: return "hii-dpo";
    case Objective::kVca: return "vca";
  }
  return "dpo";
}

inline Objective parse_objective(std::string_view s) {
  if (s == "dpo") return Objective::kDpo;
  if (s == "hii-dpo") return Objective::kHiiDpo;
  if (s == "vca") return Objective::kVca;
  throw ValidationError("objective", "expected dpo, hii-dpo or vca, got '" + std::string(s) + "'");
}

// Derivatives of the batch loss with respect to one sample's policy terms.
struct SampleGrad {
  double d_pol_plus = 0.0;
  double d_pol_minus = 0.0;
};

struct LossResult {
  double loss = 0.0;  // uniform mean of per_sample
  std::vector<double> per_sample;
  std::vector<double> z;  // sigmoid argument per sample
  std::vector<SampleGrad> grad;
};

inline double sigmoid_argument(const LossSample& s, double beta) {
  return beta * ((s.lp_pol_plus - s.lp_ref_plus) - (s.lp_pol_minus - s.lp_ref_minus));
}

// -log sigmoid(z) per sample, averaged. For the vision-contrastive objective
// "plus"/"minus" are the clean and corrupted image conditionings of the same
// response; the arithmetic is identical.
inline LossResult pairwise_logistic_loss(std::span<const LossSample> batch, double beta) {
  check_beta(beta);
  if (batch.empty()) throw ValidationError("batch", "must contain at least one sample");
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::string at = "batch[" + std::to_string(i) + "].";
    check_finite(batch[i].lp_pol_plus, at + "lp_pol_plus");
    check_finite(batch[i].lp_ref_plus, at + "lp_ref_plus");
    check_finite(batch[i].lp_pol_minus, at + "lp_pol_minus");
    check_finite(batch[i].lp_ref_minus, at + "lp_ref_minus");
  }
  const double n = static_cast<double>(batch.size());
  LossResult r;
  r.per_sample.reserve(batch.size());
  r.z.reserve(batch.size());
  r.grad.reserve(batch.size());
  double sum = 0.0;
  for (const auto& s : batch) {
    const double z = sigmoid_argument(s, beta);
    const double l = softplus(-z);
    const double g = beta * sigmoid(-z) / n;
    r.z.push_back(z);
    r.per_sample.push_back(l);
    r.grad.push_back(SampleGrad{-g, g});
    sum += l;
  }
  r.loss = sum / n;
  return r;
}

inline LossResult dpo_loss(std::span<const LossSample> batch, double beta) {
  return pairwise_logistic_loss(batch, beta);
}

// Every sample must be conditioned on a masked image.
inline void check_hii_batch(std::span<const LossSample> batch) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::string field = "batch[" + std::to_string(i) + "].image_id";
    if (!batch[i].image_id) throw ValidationError(field, "required for hii-dpo");
    if (!is_masked_image_id(*batch[i].image_id))
      throw ValidationError(field, "'" + *batch[i].image_id + "' is not a masked image id");
  }
}

inline LossResult hii_dpo_loss(std::span<const LossSample> batch, double beta) {
  check_hii_batch(batch);
  return pairwise_logistic_loss(batch, beta);
}

inline LossResult vca_loss(std::span<const LossSample> batch, double beta) {
  return pairwise_logistic_loss(batch, beta);
}

inline LossResult compute_loss(Objective o, std::span<const LossSample> batch, double beta) {
  switch (o) {
    case Objective::kDpo: return dpo_loss(batch, beta);
    case Objective::kHiiDpo: return hii_dpo_loss(batch, beta);
    case Objective::kVca: return vca_loss(batch, beta);
  }
  return dpo_loss(batch, beta);
}

struct GradCheck {
  double step = 1e-6;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

inline double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// Central differences of each sample's loss in its two policy inputs,
// compared with the analytic batch gradient scaled back by the batch size.
inline GradCheck check_gradients(Objective o, std::span<const LossSample> batch, double beta,
                                 double step = 1e-6) {
  const LossResult analytic = compute_loss(o, batch, beta);
  const double n = static_cast<double>(batch.size());
  GradCheck report;
  report.step = step;
  auto one = [&](LossSample s) { return softplus(-sigmoid_argument(s, beta)); };
  auto central = [&](const LossSample& s, double LossSample::*member) {
    LossSample hi = s;
    LossSample lo = s;
    hi.*member += step;
    lo.*member -= step;
    return (one(hi) - one(lo)) / (hi.*member - lo.*member);
  };
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double fd_plus = central(batch[i], &LossSample::lp_pol_plus);
    const double fd_minus = central(batch[i], &LossSample::lp_pol_minus);
    const double an_plus = analytic.grad[i].d_pol_plus * n;
    const double an_minus = analytic.grad[i].d_pol_minus * n;
    for (auto [a, f] : {std::pair{an_plus, fd_plus}, std::pair{an_minus, fd_minus}}) {
      report.max_rel_error = std::max(report.max_rel_error, relative_error(a, f));
      report.max_abs_error = std::max(report.max_abs_error, std::abs(a - f));
      ++report.checked;
    }
  }
  return report;
}

inline Json to_json(const LossResult& r, Objective o, double beta) {
  Json j;
  j["objective"] = std::string(to_string(o));
  j["beta"] = beta;
  j["n"] = r.per_sample.size();
  j["loss"] = r.loss;
  j["per_sample"] = r.per_sample;
  Json grads = Json::array();
  for (const auto& g : r.grad) grads.push_back({{"d_lp_pol_plus", g.d_pol_plus}, {"d_lp_pol_minus", g.d_pol_minus}});
  j["grad"] = std::move(grads);
  return j;
}

inline Json to_json(const GradCheck& g) {
  Json j;
  j["step"] = g.step;
  j["checked"] = g.checked;
  j["max_rel_error"] = g.max_rel_error;
  j["max_abs_error"] = g.max_abs_error;
  return j;
}

}  // namespace hiiforge::math
