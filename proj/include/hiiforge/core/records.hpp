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

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/vocabulary.hpp"

namespace hiiforge {

// Half-open pixel rectangle [x_min, x_max) x [y_min, y_max).
struct BoundingBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const noexcept { return x_max - x_min; }
  int height() const noexcept { return y_max - y_min; }
  std::int64_t area() const noexcept {
    return static_cast<std::int64_t>(width()) * height();
  }
  bool contains(int x, int y) const noexcept {
    return x >= x_min && x < x_max && y >= y_min && y < y_max;
  }
  bool within(int image_width, int image_height) const noexcept {
    return 0 <= x_min && x_min < x_max && x_max <= image_width && 0 <= y_min &&
           y_min < y_max && y_max <= image_height;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Detection {
  BoundingBox box;
  CanonicalClass canonical_class = CanonicalClass::from_index(0);
  std::string raw_label;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct ImageRecord {
  std::string image_id;
  std::string source_path;
  int width = 0;
  int height = 0;
  std::optional<Scene> scene;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

// A counterfactual copy of a source image with one class occluded.
// width/height are the parent's dimensions, carried so that mask_regions can
// be bounds-checked without opening the parent record.
struct MaskedImage {
  std::string masked_image_id;
  std::string parent;
  CanonicalClass masked_class = CanonicalClass::from_index(0);
  std::vector<BoundingBox> mask_regions;
  int iterations_used = 0;
  std::string output_path;
  int width = 0;
  int height = 0;

  friend bool operator==(const MaskedImage&, const MaskedImage&) = default;
};

struct HiiRecord {
  MaskedImage masked_image;
  std::string target_model;
  int sampled_responses = 0;
  int hallucinating_responses = 0;
  double hii_rate = 0.0;

  friend bool operator==(const HiiRecord&, const HiiRecord&) = default;
};

struct MohItem {
  MaskedImage masked_image;
  CanonicalClass masked_class = CanonicalClass::from_index(0);
  Scene scene = Scene::kOtherIndoor;

  friend bool operator==(const MohItem&, const MohItem&) = default;
};

struct PreferencePair {
  std::string pair_id;
  std::string hii_id;
  std::string image_path;
  std::string target_model;
  CanonicalClass masked_class = CanonicalClass::from_index(0);
  int prompt_index = 0;
  int step_index = 0;
  std::string prompt;
  std::string prefix;
  std::string chosen_sentence;
  std::string rejected_sentence;
  std::vector<CanonicalClass> chosen_entities;
  std::vector<CanonicalClass> rejected_entities;

  std::string chosen() const { return prefix + chosen_sentence; }
  std::string rejected() const { return prefix + rejected_sentence; }

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

// Sequence log-probabilities (natural log) for one preference tuple. For the
// vision-contrastive objective "plus"/"minus" name the clean and corrupted
// image conditioning of the same chosen response.
struct LossSample {
  double lp_pol_plus = 0.0;
  double lp_ref_plus = 0.0;
  double lp_pol_minus = 0.0;
  double lp_ref_minus = 0.0;
  std::optional<std::string> image_id;

  friend bool operator==(const LossSample&, const LossSample&) = default;
};

// Scene label sidecar line: {"image_id": ..., "scene": ...}.
struct SceneAssignment {
  std::string image_id;
  Scene scene = Scene::kOtherIndoor;

  friend bool operator==(const SceneAssignment&, const SceneAssignment&) = default;
};

// ---------------------------------------------------------------------------
// masked_image_id = parent + "#" + class + "#" + iterations

inline std::string make_masked_image_id(std::string_view parent, CanonicalClass cls,
                                        int iterations) {
  std::string id(parent);
  id += '#';
  id += cls.name();
  id += '#';
  id += std::to_string(iterations);
  return id;
}

struct MaskedImageIdParts {
  std::string parent;
  CanonicalClass masked_class;
  int iterations;
};

inline std::optional<MaskedImageIdParts> parse_masked_image_id(std::string_view id) {
  const auto last = id.rfind('#');
  if (last == std::string_view::npos || last == 0) return std::nullopt;
  const auto mid = id.rfind('#', last - 1);
  if (mid == std::string_view::npos || mid == 0) return std::nullopt;
  const auto cls = CanonicalClass::find(id.substr(mid + 1, last - mid - 1));
  if (!cls) return std::nullopt;
  const auto digits = id.substr(last + 1);
  if (digits.empty() || digits.size() > 6) return std::nullopt;
  int iterations = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
    iterations = iterations * 10 + (c - '0');
  }
  if (iterations < 1) return std::nullopt;
  return MaskedImageIdParts{std::string(id.substr(0, mid)), *cls, iterations};
}

inline bool is_masked_image_id(std::string_view id) {
  return parse_masked_image_id(id).has_value();
}

// ---------------------------------------------------------------------------
// Invariant checks. Each throws ValidationError naming the offending field.

inline void validate(const BoundingBox& box, int width, int height,
                     const std::string& field = "box") {
  if (box.x_min < 0) throw ValidationError(field + ".x_min", "must be >= 0");
  if (box.y_min < 0) throw ValidationError(field + ".y_min", "must be >= 0");
  if (box.x_max <= box.x_min) throw ValidationError(field + ".x_max", "must be > x_min");
  if (box.y_max <= box.y_min) throw ValidationError(field + ".y_max", "must be > y_min");
  if (box.x_max > width) throw ValidationError(field + ".x_max", "exceeds image width");
  if (box.y_max > height) throw ValidationError(field + ".y_max", "exceeds image height");
}

inline void validate_confidence(double c, const std::string& field = "confidence") {
  if (!(c >= 0.0 && c <= 1.0)) throw ValidationError(field, "must lie in [0, 1]");
}

inline void validate(const ImageRecord& r) {
  if (r.image_id.empty()) throw ValidationError("image_id", "must be non-empty");
  if (r.source_path.empty()) throw ValidationError("source_path", "must be non-empty");
  if (r.width <= 0) throw ValidationError("width", "must be > 0");
  if (r.height <= 0) throw ValidationError("height", "must be > 0");
}

inline void validate(const MaskedImage& m, const std::string& prefix = "") {
  if (m.masked_image_id.empty())
    throw ValidationError(prefix + "masked_image_id", "must be non-empty");
  if (m.parent.empty()) throw ValidationError(prefix + "parent", "must be non-empty");
  if (m.width <= 0) throw ValidationError(prefix + "width", "must be > 0");
  if (m.height <= 0) throw ValidationError(prefix + "height", "must be > 0");
  if (m.iterations_used < 1) throw ValidationError(prefix + "iterations_used", "must be >= 1");
  if (m.output_path.empty()) throw ValidationError(prefix + "output_path", "must be non-empty");
  if (m.mask_regions.empty())
    throw ValidationError(prefix + "mask_regions", "must be non-empty");
  for (std::size_t i = 0; i < m.mask_regions.size(); ++i) {
    validate(m.mask_regions[i], m.width, m.height,
             prefix + "mask_regions[" + std::to_string(i) + "]");
  }
}

// The majority rule (rate >= threshold) is a filter-stage postcondition and
// is not re-checked here; see filter_hii.
inline void validate(const HiiRecord& h) {
  validate(h.masked_image, "masked_image.");
  if (h.target_model.empty()) throw ValidationError("target_model", "must be non-empty");
  if (h.sampled_responses < 1) throw ValidationError("sampled_responses", "must be >= 1");
  if (h.hallucinating_responses < 0 || h.hallucinating_responses > h.sampled_responses)
    throw ValidationError("hallucinating_responses", "must lie in [0, sampled_responses]");
  const double expected =
      static_cast<double>(h.hallucinating_responses) / h.sampled_responses;
  if (h.hii_rate != expected)
    throw ValidationError("hii_rate", "must equal hallucinating_responses / sampled_responses");
}

inline void validate(const MohItem& item) {
  validate(item.masked_image, "masked_image.");
  if (item.masked_class != item.masked_image.masked_class)
    throw ValidationError("masked_class", "must equal masked_image.masked_class");
}

inline void validate(const PreferencePair& p) {
  if (p.pair_id.empty()) throw ValidationError("pair_id", "must be non-empty");
  if (p.hii_id.empty()) throw ValidationError("hii_id", "must be non-empty");
  if (p.chosen_sentence.empty())
    throw ValidationError("chosen_sentence", "must be non-empty");
  if (p.chosen_sentence == p.rejected_sentence)
    throw ValidationError("rejected_sentence", "must differ from chosen_sentence");
  if (p.rejected_entities.empty())
    throw ValidationError("rejected_entities", "must be non-empty");
  if (p.prompt_index < 0) throw ValidationError("prompt_index", "must be >= 0");
  if (p.step_index < 0) throw ValidationError("step_index", "must be >= 0");
}

inline void validate(const LossSample& s) {
  if (!std::isfinite(s.lp_pol_plus)) throw ValidationError("lp_pol_plus", "must be finite");
  if (!std::isfinite(s.lp_ref_plus)) throw ValidationError("lp_ref_plus", "must be finite");
  if (!std::isfinite(s.lp_pol_minus)) throw ValidationError("lp_pol_minus", "must be finite");
  if (!std::isfinite(s.lp_ref_minus)) throw ValidationError("lp_ref_minus", "must be finite");
}

inline void validate(const SceneAssignment& s) {
  if (s.image_id.empty()) throw ValidationError("image_id", "must be non-empty");
}

}  // namespace hiiforge
