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
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/hashing.hpp"
#include "hiiforge/core/json_codec.hpp"
#include "hiiforge/core/records.hpp"
#include "hiiforge/filter/hii_filter.hpp"
#include "hiiforge/image/image.hpp"
#include "hiiforge/lexicon/dictionary.hpp"
#include "hiiforge/mask/mask_forge.hpp"
#include "hiiforge/prefs/segmenter.hpp"
#include "hiiforge/protocol/backend.hpp"

namespace hiiforge::prefs {

inline std::vector<std::string> default_prompt_pool() {
  return {
      "What is this photo about? Please answer in great detail.",
      "Describe this image in detail.",
      "Provide a thorough description of the given picture.",
      "Please provide a detailed description of the picture.",
      "Take a look at this image and describe what you notice.",
      "Could you describe the contents of this image for me?",
  };
}

struct PrefConfig {
  std::vector<std::string> prompt_pool = default_prompt_pool();
  int prompts_per_hii = 3;
  int candidates_per_step = 4;
  int max_sentences = 8;
  double verify_threshold = 0.35;
  double temperature = 1.0;
  double top_p = 0.9;
  int max_tokens = 96;
  std::uint64_t seed = 0;
  // Keep only the first pair per (HII, rejected sentence).
  bool dedup = false;

  void validate() const {
    if (prompt_pool.empty()) throw ValidationError("prefs.prompt_pool", "must be non-empty");
    for (const auto& p : prompt_pool) {
      if (p.empty()) throw ValidationError("prefs.prompt_pool", "prompts must be non-empty");
    }
    if (prompts_per_hii < 1 || static_cast<std::size_t>(prompts_per_hii) > prompt_pool.size())
      throw ValidationError("prefs.prompts_per_hii", "must lie in [1, size of prompt_pool]");
    if (candidates_per_step < 2) throw ValidationError("prefs.candidates_per_step", "must be >= 2");
    if (max_sentences < 1) throw ValidationError("prefs.max_sentences", "must be >= 1");
    if (!(verify_threshold > 0.0 && verify_threshold < 1.0))
      throw ValidationError("prefs.verify_threshold", "must lie in (0, 1)");
  }
};

// Seeded draw of `count` distinct pool indices (partial Fisher-Yates).
inline std::vector<int> draw_prompts(std::size_t pool_size, int count, std::uint64_t seed) {
  std::vector<int> idx(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) idx[i] = static_cast<int>(i);
  SplitMix64 rng(seed);
  const auto n = std::min<std::size_t>(pool_size, static_cast<std::size_t>(std::max(count, 0)));
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool_size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

inline std::string make_pair_id(std::string_view hii_id, int prompt_index, int step_index) {
  return sha256_hex(key_of({hii_id, std::to_string(prompt_index), std::to_string(step_index)}))
      .substr(0, 16);
}

// The HII as the detector sees it during verification.
struct HiiImage {
  std::string image_id;
  Image image;
  std::optional<std::filesystem::path> on_disk;
};

inline HiiImage load_hii_image(const MaskedImage& m, const filter::ImageAccess& access) {
  const auto path = access.resolve(m.output_path);
  return HiiImage{m.masked_image_id, load_png(path), path};
}

struct Verification {
  std::vector<CanonicalClass> verified;
  std::vector<CanonicalClass> unverified;

  friend bool operator==(const Verification&, const Verification&) = default;
};

// Per-HII memo of detector verdicts; one detector call per class.
class VerificationCache {
 public:
  VerificationCache(const HiiImage& hii, mask::DetectorContext ctx, double threshold)
      : hii_(hii), ctx_(ctx), threshold_(threshold) {}

  bool present(CanonicalClass cls) {
    if (auto it = verdicts_.find(cls); it != verdicts_.end()) return it->second;
    const bool found =
        !mask::detect_class(hii_.image_id, hii_.image, hii_.on_disk, cls, ctx_, threshold_).empty();
    verdicts_.emplace(cls, found);
    return found;
  }

  std::size_t detector_calls() const noexcept { return verdicts_.size(); }

 private:
  const HiiImage& hii_;
  mask::DetectorContext ctx_;
  double threshold_;
  std::map<CanonicalClass, bool> verdicts_;
};

// An entity is verified iff the detector finds it on the HII at or above the
// threshold. Order of the input is preserved inside each part.
inline Verification verify_entities(const std::vector<CanonicalClass>& entities,
                                    VerificationCache& cache) {
  Verification v;
  for (auto cls : entities) (cache.present(cls) ? v.verified : v.unverified).push_back(cls);
  return v;
}

inline Verification verify_entities(const std::vector<CanonicalClass>& entities,
                                    const HiiImage& hii, mask::DetectorContext ctx,
                                    double threshold) {
  VerificationCache cache(hii, ctx, threshold);
  return verify_entities(entities, cache);
}

struct CandidateTrace {
  std::string sentence;
  std::vector<CanonicalClass> entities;
  std::vector<CanonicalClass> unverified;
  bool end_of_response = false;
  bool hallucinated = false;
};

struct StepTrace {
  int prompt_index = 0;
  int step_index = 0;
  std::string prefix;
  std::vector<CandidateTrace> candidates;
  std::optional<std::size_t> chosen;
  std::optional<std::size_t> rejected;
};

struct BuildResult {
  std::vector<PreferencePair> pairs;
  std::vector<StepTrace> steps;
};

inline void sort_pairs(std::vector<PreferencePair>& pairs) {
  std::ranges::stable_sort(pairs, [](const PreferencePair& a, const PreferencePair& b) {
    return std::tie(a.hii_id, a.target_model, a.prompt_index, a.step_index) <
           std::tie(b.hii_id, b.target_model, b.prompt_index, b.step_index);
  });
}

// Drops later pairs whose rejected sentence repeats one already kept for the
// same HII. Expects sorted input.
inline void dedup_pairs(std::vector<PreferencePair>& pairs) {
  std::set<std::pair<std::string, std::string>> seen;
  std::erase_if(pairs, [&](const PreferencePair& p) {
    return !seen.emplace(p.hii_id, p.rejected_sentence).second;
  });
}

// First sentence of a candidate continuation, separated from a non-empty
// prefix by a space when the model omitted one.
inline std::string next_sentence(std::string_view response, std::string_view prefix) {
  const auto segments = segment_sentences(response);
  if (segments.empty() || is_blank(segments.front())) return {};
  std::string s = segments.front();
  if (!prefix.empty() && !is_space_byte(s.front()) && !is_space_byte(prefix.back())) s.insert(0, " ");
  return s;
}

// Sentence-by-sentence rollout on one HII. Each step samples K next-sentence
// candidates conditioned on (prompt, prefix); a pair is emitted when the step
// has both a factual and a hallucinated candidate, and the rollout continues
// with the chosen sentence. The rollout ends when no non-empty candidate
// remains, when no candidate is factual, or after max_sentences steps.
inline BuildResult build_pairs(const HiiRecord& hii, protocol::VisionLanguageModel& model,
                               mask::DetectorContext ctx, const lexicon::SynonymDictionary& dict,
                               const PrefConfig& cfg, const filter::ImageAccess& access) {
  cfg.validate();
  validate(hii);
  const MaskedImage& m = hii.masked_image;
  const HiiImage hii_image = load_hii_image(m, access);
  VerificationCache cache(hii_image, ctx, cfg.verify_threshold);
  const protocol::ImageRef ref = access.ref(m.masked_image_id, m.output_path);
  const std::string seed_text = std::to_string(cfg.seed);

  BuildResult result;
  const auto prompts = draw_prompts(cfg.prompt_pool.size(), cfg.prompts_per_hii,
                                    sha256_u64(key_of({seed_text, m.masked_image_id, hii.target_model})));
  for (int prompt_index : prompts) {
    const std::string& prompt = cfg.prompt_pool[static_cast<std::size_t>(prompt_index)];
    std::string prefix;
    for (int step = 0; step < cfg.max_sentences; ++step) {
      protocol::GenerateRequest request;
      request.image = ref;
      request.prompt = prompt;
      request.prefix = prefix;
      request.mode = protocol::DecodeMode::kSample;
      request.n = cfg.candidates_per_step;
      request.temperature = cfg.temperature;
      request.top_p = cfg.top_p;
      request.max_tokens = cfg.max_tokens;
      request.granularity = protocol::Granularity::kSentence;
      request.seed = sha256_u64(key_of({seed_text, m.masked_image_id, std::to_string(prompt_index),
                                        std::to_string(step)}));
      const auto response = protocol::generate(model, request);

      StepTrace trace{prompt_index, step, prefix, {}, std::nullopt, std::nullopt};
      std::size_t most_unverified = 0;
      for (const auto& text : response.responses) {
        CandidateTrace c;
        c.sentence = next_sentence(text, prefix);
        c.end_of_response = c.sentence.empty();
        if (!c.end_of_response) {
          c.entities = lexicon::extract_entities(c.sentence, dict);
          c.unverified = verify_entities(c.entities, cache).unverified;
          // The masked class is absent by construction, whatever the detector says.
          if (std::ranges::find(c.entities, m.masked_class) != c.entities.end() &&
              std::ranges::find(c.unverified, m.masked_class) == c.unverified.end()) {
            c.unverified.push_back(m.masked_class);
          }
          c.hallucinated = !c.unverified.empty();
        }
        const std::size_t i = trace.candidates.size();
        if (!c.end_of_response && !c.hallucinated && !trace.chosen) trace.chosen = i;
        if (c.hallucinated && c.unverified.size() > most_unverified) {
          most_unverified = c.unverified.size();
          trace.rejected = i;
        }
        trace.candidates.push_back(std::move(c));
      }
      result.steps.push_back(trace);
      if (!trace.chosen) break;

      const CandidateTrace& chosen = trace.candidates[*trace.chosen];
      if (trace.rejected) {
        const CandidateTrace& rejected = trace.candidates[*trace.rejected];
        PreferencePair p;
        p.pair_id = make_pair_id(m.masked_image_id, prompt_index, step);
        p.hii_id = m.masked_image_id;
        p.image_path = m.output_path;
        p.target_model = hii.target_model;
        p.masked_class = m.masked_class;
        p.prompt_index = prompt_index;
        p.step_index = step;
        p.prompt = prompt;
        p.prefix = prefix;
        p.chosen_sentence = chosen.sentence;
        p.rejected_sentence = rejected.sentence;
        p.chosen_entities = chosen.entities;
        p.rejected_entities = rejected.unverified;
        result.pairs.push_back(std::move(p));
      }
      prefix += chosen.sentence;
    }
  }
  sort_pairs(result.pairs);
  if (cfg.dedup) dedup_pairs(result.pairs);
  return result;
}

inline Json trace_json(const StepTrace& s) {
  Json j;
  j["prompt_index"] = s.prompt_index;
  j["step_index"] = s.step_index;
  j["prefix"] = s.prefix;
  Json cands = Json::array();
  for (const auto& c : s.candidates) {
    Json jc;
    jc["sentence"] = c.sentence;
    jc["entities"] = class_names(c.entities);
    jc["unverified"] = class_names(c.unverified);
    jc["end_of_response"] = c.end_of_response;
    jc["hallucinated"] = c.hallucinated;
    cands.push_back(std::move(jc));
  }
  j["candidates"] = std::move(cands);
  j["chosen"] = s.chosen ? Json(*s.chosen) : Json(nullptr);
  j["rejected"] = s.rejected ? Json(*s.rejected) : Json(nullptr);
  return j;
}

}  // namespace hiiforge::prefs
