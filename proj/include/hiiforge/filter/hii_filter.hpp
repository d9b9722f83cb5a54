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
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/json_codec.hpp"
#include "hiiforge/core/records.hpp"
#include "hiiforge/image/image.hpp"
#include "hiiforge/lexicon/dictionary.hpp"
#include "hiiforge/protocol/backend.hpp"

namespace hiiforge::filter {

inline constexpr std::string_view kDetailedDescriptionPrompt = "Describe this image in detail.";

struct FilterConfig {
  int n_samples = 10;
  // Inclusive: rate >= threshold certifies the image.
  double hii_threshold = 0.5;
  std::string ddg_prompt{kDetailedDescriptionPrompt};
  double temperature = 1.0;
  double top_p = 0.9;
  int max_tokens = 512;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_samples < 1) throw ValidationError("filter.n_samples", "must be >= 1");
    if (!(hii_threshold > 0.0 && hii_threshold <= 1.0))
      throw ValidationError("filter.hii_threshold", "must lie in (0, 1]");
    if (ddg_prompt.empty()) throw ValidationError("filter.ddg_prompt", "must be non-empty");
  }
};

// Everything the 5-of-10 decision was based on, so it can be recounted.
struct FilterAudit {
  std::string masked_image_id;
  std::string target_model;
  CanonicalClass masked_class = CanonicalClass::from_index(0);
  std::vector<std::string> responses;
  std::vector<bool> mentions;
  int hallucinating = 0;
  double hii_rate = 0.0;
  bool accepted = false;

  friend bool operator==(const FilterAudit&, const FilterAudit&) = default;
};

struct FilterResult {
  std::optional<HiiRecord> record;  // empty means Rejected
  FilterAudit audit;
};

// Where the VLM should look: the masked PNG plus how to ship it.
struct ImageAccess {
  std::filesystem::path dataset_root;
  protocol::ImageTransport transport = protocol::ImageTransport::kBase64;

  std::filesystem::path resolve(const std::string& relative) const {
    return dataset_root / relative;
  }

  protocol::ImageRef ref(const std::string& image_id, const std::string& relative_path) const {
    const auto full = resolve(relative_path);
    if (transport == protocol::ImageTransport::kPath) {
      return protocol::ImageRef{image_id, std::filesystem::absolute(full).string(), std::nullopt};
    }
    return protocol::make_image_ref(image_id, load_png(full), std::nullopt, transport);
  }
};

// Samples n responses to the DDG prompt and certifies the image when the
// share mentioning the masked class reaches the threshold.
inline FilterResult filter_hii(const MaskedImage& masked, const std::string& target_model,
                               protocol::VisionLanguageModel& model,
                               const lexicon::SynonymDictionary& dict, const FilterConfig& cfg,
                               const ImageAccess& access) {
  cfg.validate();
  protocol::GenerateRequest request;
  request.image = access.ref(masked.masked_image_id, masked.output_path);
  request.prompt = cfg.ddg_prompt;
  request.mode = protocol::DecodeMode::kSample;
  request.n = cfg.n_samples;
  request.temperature = cfg.temperature;
  request.top_p = cfg.top_p;
  request.max_tokens = cfg.max_tokens;
  request.seed = cfg.seed;
  const auto response = protocol::generate(model, request);

  FilterResult out;
  auto& audit = out.audit;
  audit.masked_image_id = masked.masked_image_id;
  audit.target_model = target_model;
  audit.masked_class = masked.masked_class;
  audit.responses = response.responses;
  for (const auto& text : response.responses) {
    const auto entities = lexicon::extract_entities(text, dict);
    const bool mentions =
        std::find(entities.begin(), entities.end(), masked.masked_class) != entities.end();
    audit.mentions.push_back(mentions);
    audit.hallucinating += mentions ? 1 : 0;
  }
  audit.hii_rate = static_cast<double>(audit.hallucinating) / cfg.n_samples;
  audit.accepted = audit.hii_rate >= cfg.hii_threshold;
  if (audit.accepted) {
    out.record = HiiRecord{masked, target_model, cfg.n_samples, audit.hallucinating, audit.hii_rate};
  }
  return out;
}

// Masked images present in every per-model set, ordered by id.
inline std::vector<MaskedImage> intersect_hii(const std::vector<std::vector<HiiRecord>>& sets) {
  if (sets.size() < 2) throw ValidationError("sets", "intersection needs at least two model sets");
  std::map<std::string, MaskedImage> common;
  for (const auto& r : sets.front()) common.emplace(r.masked_image.masked_image_id, r.masked_image);
  for (std::size_t i = 1; i < sets.size(); ++i) {
    std::set<std::string> ids;
    for (const auto& r : sets[i]) ids.insert(r.masked_image.masked_image_id);
    std::erase_if(common, [&](const auto& kv) { return !ids.contains(kv.first); });
  }
  std::vector<MaskedImage> out;
  out.reserve(common.size());
  for (auto& [id, m] : common) out.push_back(std::move(m));
  return out;
}

}  // namespace hiiforge::filter

namespace hiiforge {

template <>
struct RecordCodec<filter::FilterAudit> {
  static Json encode(const filter::FilterAudit& a) {
    Json j;
    j["masked_image_id"] = a.masked_image_id;
    j["target_model"] = a.target_model;
    j["masked_class"] = std::string(a.masked_class.name());
    j["responses"] = a.responses;
    j["mentions"] = a.mentions;
    j["hallucinating_responses"] = a.hallucinating;
    j["hii_rate"] = a.hii_rate;
    j["accepted"] = a.accepted;
    return j;
  }
  static filter::FilterAudit decode(const Json& j, const std::string& path = "") {
    filter::FilterAudit a;
    a.masked_image_id = field::string(j, "masked_image_id", path);
    a.target_model = field::string(j, "target_model", path);
    a.masked_class = field::canonical(j, "masked_class", path);
    a.responses = field::strings(j, "responses", path);
    for (const auto& v : field::array(j, "mentions", path)) {
      if (!v.is_boolean()) throw ValidationError(path + "mentions", "expected booleans");
      a.mentions.push_back(v.get<bool>());
    }
    a.hallucinating = field::int32(j, "hallucinating_responses", path);
    a.hii_rate = field::number(j, "hii_rate", path);
    a.accepted = field::boolean(j, "accepted", path);
    return a;
  }
};

}  // namespace hiiforge
