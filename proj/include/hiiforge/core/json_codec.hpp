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

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/records.hpp"
#include "hiiforge/core/vocabulary.hpp"
#include "json.hpp"

namespace hiiforge {

// Insertion-ordered so that serialized field order is fixed by the encoders.
using Json = nlohmann::ordered_json;

// Typed field access with invariant-style error reporting.
namespace field {

inline const Json& at(const Json& j, std::string_view key, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path.empty() ? "<root>" : path, "expected object");
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(path + std::string(key), "missing");
  return *it;
}

inline bool has(const Json& j, std::string_view key) {
  return j.is_object() && j.contains(key) && !j.at(std::string(key)).is_null();
}

inline std::string string(const Json& j, std::string_view key, const std::string& path = "") {
  const Json& v = at(j, key, path);
  if (!v.is_string()) throw ValidationError(path + std::string(key), "expected string");
  return v.get<std::string>();
}

inline double number(const Json& j, std::string_view key, const std::string& path = "") {
  const Json& v = at(j, key, path);
  if (!v.is_number()) throw ValidationError(path + std::string(key), "expected number");
  return v.get<double>();
}

inline std::int64_t integer(const Json& j, std::string_view key, const std::string& path = "") {
  const Json& v = at(j, key, path);
  if (!v.is_number_integer())
    throw ValidationError(path + std::string(key), "expected integer");
  return v.get<std::int64_t>();
}

inline int int32(const Json& j, std::string_view key, const std::string& path = "") {
  const auto v = integer(j, key, path);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ValidationError(path + std::string(key), "integer out of range");
  return static_cast<int>(v);
}

inline bool boolean(const Json& j, std::string_view key, const std::string& path = "") {
  const Json& v = at(j, key, path);
  if (!v.is_boolean()) throw ValidationError(path + std::string(key), "expected boolean");
  return v.get<bool>();
}

inline const Json& array(const Json& j, std::string_view key, const std::string& path = "") {
  const Json& v = at(j, key, path);
  if (!v.is_array()) throw ValidationError(path + std::string(key), "expected array");
  return v;
}

inline std::vector<std::string> strings(const Json& j, std::string_view key,
                                        const std::string& path = "") {
  const Json& arr = array(j, key, path);
  std::vector<std::string> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string())
      throw ValidationError(path + std::string(key) + "[" + std::to_string(i) + "]",
                            "expected string");
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

inline CanonicalClass canonical(const Json& j, std::string_view key, const std::string& path = "") {
  const auto name = string(j, key, path);
  auto cls = CanonicalClass::find(name);
  if (!cls) throw ValidationError(path + std::string(key), "unknown canonical class '" + name + "'");
  return *cls;
}

inline std::vector<CanonicalClass> canonicals(const Json& j, std::string_view key,
                                              const std::string& path = "") {
  std::vector<CanonicalClass> out;
  const auto names = strings(j, key, path);
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto cls = CanonicalClass::find(names[i]);
    if (!cls)
      throw ValidationError(path + std::string(key) + "[" + std::to_string(i) + "]",
                            "unknown canonical class '" + names[i] + "'");
    out.push_back(*cls);
  }
  return out;
}

inline Scene scene(const Json& j, std::string_view key, const std::string& path = "") {
  const auto name = string(j, key, path);
  auto s = find_scene(name);
  if (!s) throw ValidationError(path + std::string(key), "unknown scene label '" + name + "'");
  return *s;
}

}  // namespace field

inline Json class_names(const std::vector<CanonicalClass>& classes) {
  Json arr = Json::array();
  for (auto c : classes) arr.push_back(std::string(c.name()));
  return arr;
}

// Encoder/decoder pair per record kind. Decoders only check shape; semantic
// invariants are checked by validate().
template <class T>
struct RecordCodec;

template <>
struct RecordCodec<BoundingBox> {
  static Json encode(const BoundingBox& b) {
    Json j;
    j["x_min"] = b.x_min;
    j["y_min"] = b.y_min;
    j["x_max"] = b.x_max;
    j["y_max"] = b.y_max;
    return j;
  }
  static BoundingBox decode(const Json& j, const std::string& path = "") {
    return BoundingBox{field::int32(j, "x_min", path), field::int32(j, "y_min", path),
                       field::int32(j, "x_max", path), field::int32(j, "y_max", path)};
  }
};

template <>
struct RecordCodec<Detection> {
  static Json encode(const Detection& d) {
    Json j;
    j["box"] = RecordCodec<BoundingBox>::encode(d.box);
    j["canonical_class"] = std::string(d.canonical_class.name());
    j["raw_label"] = d.raw_label;
    j["confidence"] = d.confidence;
    return j;
  }
  static Detection decode(const Json& j, const std::string& path = "") {
    Detection d;
    d.box = RecordCodec<BoundingBox>::decode(field::at(j, "box", path), path + "box.");
    d.canonical_class = field::canonical(j, "canonical_class", path);
    d.raw_label = field::string(j, "raw_label", path);
    d.confidence = field::number(j, "confidence", path);
    return d;
  }
};

template <>
struct RecordCodec<ImageRecord> {
  static Json encode(const ImageRecord& r) {
    Json j;
    j["image_id"] = r.image_id;
    j["source_path"] = r.source_path;
    j["width"] = r.width;
    j["height"] = r.height;
    if (r.scene) j["scene"] = std::string(to_string(*r.scene));
    return j;
  }
  static ImageRecord decode(const Json& j, const std::string& path = "") {
    ImageRecord r;
    r.image_id = field::string(j, "image_id", path);
    r.source_path = field::string(j, "source_path", path);
    r.width = field::int32(j, "width", path);
    r.height = field::int32(j, "height", path);
    if (field::has(j, "scene")) r.scene = field::scene(j, "scene", path);
    return r;
  }
};

template <>
struct RecordCodec<MaskedImage> {
  static Json encode(const MaskedImage& m) {
    Json j;
    j["masked_image_id"] = m.masked_image_id;
    j["parent"] = m.parent;
    j["masked_class"] = std::string(m.masked_class.name());
    Json regions = Json::array();
    for (const auto& b : m.mask_regions) regions.push_back(RecordCodec<BoundingBox>::encode(b));
    j["mask_regions"] = std::move(regions);
    j["iterations_used"] = m.iterations_used;
    j["output_path"] = m.output_path;
    j["width"] = m.width;
    j["height"] = m.height;
    return j;
  }
  static MaskedImage decode(const Json& j, const std::string& path = "") {
    MaskedImage m;
    m.masked_image_id = field::string(j, "masked_image_id", path);
    m.parent = field::string(j, "parent", path);
    m.masked_class = field::canonical(j, "masked_class", path);
    const Json& regions = field::array(j, "mask_regions", path);
    for (std::size_t i = 0; i < regions.size(); ++i) {
      m.mask_regions.push_back(RecordCodec<BoundingBox>::decode(
          regions[i], path + "mask_regions[" + std::to_string(i) + "]."));
    }
    m.iterations_used = field::int32(j, "iterations_used", path);
    m.output_path = field::string(j, "output_path", path);
    m.width = field::int32(j, "width", path);
    m.height = field::int32(j, "height", path);
    return m;
  }
};

template <>
struct RecordCodec<HiiRecord> {
  static Json encode(const HiiRecord& h) {
    Json j;
    j["masked_image"] = RecordCodec<MaskedImage>::encode(h.masked_image);
    j["target_model"] = h.target_model;
    j["sampled_responses"] = h.sampled_responses;
    j["hallucinating_responses"] = h.hallucinating_responses;
    j["hii_rate"] = h.hii_rate;
    return j;
  }
  static HiiRecord decode(const Json& j, const std::string& path = "") {
    HiiRecord h;
    h.masked_image =
        RecordCodec<MaskedImage>::decode(field::at(j, "masked_image", path), path + "masked_image.");
    h.target_model = field::string(j, "target_model", path);
    h.sampled_responses = field::int32(j, "sampled_responses", path);
    h.hallucinating_responses = field::int32(j, "hallucinating_responses", path);
    h.hii_rate = field::number(j, "hii_rate", path);
    return h;
  }
};

template <>
struct RecordCodec<MohItem> {
  static Json encode(const MohItem& item) {
    Json j;
    j["masked_image"] = RecordCodec<MaskedImage>::encode(item.masked_image);
    j["masked_class"] = std::string(item.masked_class.name());
    j["scene"] = std::string(to_string(item.scene));
    return j;
  }
  static MohItem decode(const Json& j, const std::string& path = "") {
    MohItem item;
    item.masked_image =
        RecordCodec<MaskedImage>::decode(field::at(j, "masked_image", path), path + "masked_image.");
    item.masked_class = field::canonical(j, "masked_class", path);
    item.scene = field::scene(j, "scene", path);
    return item;
  }
};

// The chosen/rejected full strings are emitted for direct consumption by DPO
// trainers; on decode they are recomputed from prefix + sentence and checked.
template <>
struct RecordCodec<PreferencePair> {
  static Json encode(const PreferencePair& p) {
    Json j;
    j["pair_id"] = p.pair_id;
    j["hii_id"] = p.hii_id;
    j["image"] = p.image_path;
    j["target_model"] = p.target_model;
    j["masked_class"] = std::string(p.masked_class.name());
    j["prompt_index"] = p.prompt_index;
    j["step_index"] = p.step_index;
    j["prompt"] = p.prompt;
    j["chosen"] = p.chosen();
    j["rejected"] = p.rejected();
    j["prefix"] = p.prefix;
    j["chosen_sentence"] = p.chosen_sentence;
    j["rejected_sentence"] = p.rejected_sentence;
    j["chosen_entities"] = class_names(p.chosen_entities);
    j["rejected_entities"] = class_names(p.rejected_entities);
    return j;
  }
  static PreferencePair decode(const Json& j, const std::string& path = "") {
    PreferencePair p;
    p.pair_id = field::string(j, "pair_id", path);
    p.hii_id = field::string(j, "hii_id", path);
    p.image_path = field::string(j, "image", path);
    p.target_model = field::string(j, "target_model", path);
    p.masked_class = field::canonical(j, "masked_class", path);
    p.prompt_index = field::int32(j, "prompt_index", path);
    p.step_index = field::int32(j, "step_index", path);
    p.prompt = field::string(j, "prompt", path);
    p.prefix = field::string(j, "prefix", path);
    p.chosen_sentence = field::string(j, "chosen_sentence", path);
    p.rejected_sentence = field::string(j, "rejected_sentence", path);
    p.chosen_entities = field::canonicals(j, "chosen_entities", path);
    p.rejected_entities = field::canonicals(j, "rejected_entities", path);
    if (field::string(j, "chosen", path) != p.chosen())
      throw ValidationError(path + "chosen", "must equal prefix + chosen_sentence");
    if (field::string(j, "rejected", path) != p.rejected())
      throw ValidationError(path + "rejected", "must equal prefix + rejected_sentence");
    return p;
  }
};

template <>
struct RecordCodec<LossSample> {
  static Json encode(const LossSample& s) {
    Json j;
    j["lp_pol_plus"] = s.lp_pol_plus;
    j["lp_ref_plus"] = s.lp_ref_plus;
    j["lp_pol_minus"] = s.lp_pol_minus;
    j["lp_ref_minus"] = s.lp_ref_minus;
    if (s.image_id) j["image_id"] = *s.image_id;
    return j;
  }
  static LossSample decode(const Json& j, const std::string& path = "") {
    LossSample s;
    s.lp_pol_plus = field::number(j, "lp_pol_plus", path);
    s.lp_ref_plus = field::number(j, "lp_ref_plus", path);
    s.lp_pol_minus = field::number(j, "lp_pol_minus", path);
    s.lp_ref_minus = field::number(j, "lp_ref_minus", path);
    if (field::has(j, "image_id")) s.image_id = field::string(j, "image_id", path);
    return s;
  }
};

template <>
struct RecordCodec<SceneAssignment> {
  static Json encode(const SceneAssignment& s) {
    Json j;
    j["image_id"] = s.image_id;
    j["scene"] = std::string(to_string(s.scene));
    return j;
  }
  static SceneAssignment decode(const Json& j, const std::string& path = "") {
    return SceneAssignment{field::string(j, "image_id", path), field::scene(j, "scene", path)};
  }
};

}  // namespace hiiforge
