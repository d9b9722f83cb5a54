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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/json_codec.hpp"
#include "hiiforge/core/records.hpp"
#include "hiiforge/image/image.hpp"
#include "hiiforge/lexicon/dictionary.hpp"
#include "hiiforge/protocol/backend.hpp"

namespace hiiforge::mask {

struct MaskConfig {
  double detect_threshold = 0.35;
  int max_iterations = 5;
  // Fraction of max(width, height) added to every box edge.
  double dilation_fraction = 0.02;
  Rgb fill{0, 0, 0};
  // Where masked PNGs go, relative to the dataset root.
  std::string output_dir = "masked";

  void validate() const {
    if (!(detect_threshold > 0.0 && detect_threshold < 1.0))
      throw ValidationError("mask.detect_threshold", "must lie in (0, 1)");
    if (max_iterations < 1) throw ValidationError("mask.max_iterations", "must be >= 1");
    if (!(dilation_fraction >= 0.0)) throw ValidationError("mask.dilation_fraction", "must be >= 0");
  }
};

// What the masking stage needs to talk to the detector.
struct DetectorContext {
  protocol::Detector& detector;
  const lexicon::SynonymDictionary& dict;
  protocol::ImageTransport transport = protocol::ImageTransport::kBase64;
};

inline std::vector<BoundingBox> dilate_regions(std::span<const BoundingBox> regions,
                                               const MaskConfig& cfg, int width, int height) {
  std::vector<BoundingBox> out;
  out.reserve(regions.size());
  for (const auto& r : regions) {
    BoundingBox b = r;
    if (!clamp_box(b, width, height)) continue;
    out.push_back(dilate(b, cfg.dilation_fraction, width, height));
  }
  return out;
}

// Fills every dilated region with cfg.fill; all other pixels are untouched.
inline Image apply_mask(const Image& image, std::span<const BoundingBox> regions,
                        const MaskConfig& cfg) {
  Image out = image;
  const auto dilated = dilate_regions(regions, cfg, image.width(), image.height());
  fill_regions(out, dilated, cfg.fill);
  return out;
}

// Maps raw detector output onto canonical classes and pixel boxes. Labels the
// dictionary cannot place, and boxes entirely off-image, are dropped.
inline std::vector<Detection> normalize_detections(const protocol::DetectResponse& response,
                                                   const lexicon::SynonymDictionary& dict,
                                                   int width, int height) {
  std::vector<Detection> out;
  for (const auto& raw : response.detections) {
    auto cls = lexicon::normalize_label(raw.raw_label, dict);
    if (!cls) continue;
    auto box = protocol::to_pixel_box(raw.box, width, height);
    if (!box) continue;
    out.push_back(Detection{*box, *cls, raw.raw_label, raw.confidence});
  }
  return out;
}

struct Candidate {
  CanonicalClass cls;
  std::vector<Detection> detections;
};

// Detects every vocabulary class in one request and groups the hits at or
// above the threshold by canonical class (vocabulary order).
inline std::vector<Candidate> detect_candidates(const ImageRecord& record, const Image& image,
                                                const std::optional<std::filesystem::path>& on_disk,
                                                DetectorContext ctx, const MaskConfig& cfg) {
  cfg.validate();
  protocol::DetectRequest request;
  request.image = protocol::make_image_ref(record.image_id, image, on_disk, ctx.transport);
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    request.class_prompts.push_back(ctx.dict.class_prompt(CanonicalClass::from_index(i)));
  }
  request.box_threshold = cfg.detect_threshold;
  const auto response = protocol::detect(ctx.detector, request);
  std::vector<Candidate> out;
  for (const auto& d : normalize_detections(response, ctx.dict, image.width(), image.height())) {
    if (d.confidence < cfg.detect_threshold) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const Candidate& c) { return c.cls == d.canonical_class; });
    if (it == out.end()) {
      out.push_back(Candidate{d.canonical_class, {d}});
    } else {
      it->detections.push_back(d);
    }
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.cls < b.cls; });
  return out;
}

// Target-class detections at or above the threshold.
inline std::vector<Detection> detect_class(const std::string& image_id, const Image& image,
                                           const std::optional<std::filesystem::path>& on_disk,
                                           CanonicalClass target, DetectorContext ctx,
                                           double threshold) {
  protocol::DetectRequest request;
  request.image = protocol::make_image_ref(image_id, image, on_disk, ctx.transport);
  request.class_prompts = {ctx.dict.class_prompt(target)};
  request.box_threshold = threshold;
  const auto response = protocol::detect(ctx.detector, request);
  auto all = normalize_detections(response, ctx.dict, image.width(), image.height());
  std::erase_if(all, [&](const Detection& d) {
    return d.canonical_class != target || d.confidence < threshold;
  });
  return all;
}

enum class MaskStatus {
  kMasked,       // target no longer detected
  kExhausted,    // still detected after max_iterations masking rounds
  kNotDetected,  // target absent on the very first round (precondition miss)
};

inline std::string_view to_string(MaskStatus s) {
  switch (s) {
    case MaskStatus::kMasked: return "masked";
    case MaskStatus::kExhausted: return "exhausted";
    case MaskStatus::kNotDetected: return "not_detected";
  }
  return "unknown";
}

// One detector round: what was seen and which dilated regions were painted.
struct MaskRound {
  int round = 0;
  std::vector<Detection> detections;
  std::vector<BoundingBox> regions;
};

struct MaskResult {
  MaskStatus status = MaskStatus::kExhausted;
  std::optional<MaskedImage> masked;  // set iff status == kMasked
  Image image;                        // final pixels
  std::vector<MaskRound> rounds;
};

// Called after each masking round with the image as painted so far.
using MaskObserver = std::function<void(int round, const Image&)>;

inline std::string masked_file_name(std::string_view masked_image_id) {
  std::string out;
  for (char c : masked_image_id) {
    if (c == '#') {
      out += "__";
    } else if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               c == '-' || c == '.' || c == '_') {
      out += c;
    } else {
      out += '_';
    }
  }
  return out + ".png";
}

// Detect-and-mask until the target is gone. Round k detects the target on
// the current image; if nothing is found the image is done and
// iterations_used = k. Otherwise the dilated boxes are painted and the loop
// continues. After max_iterations paintings one last verification round
// decides between success (iterations_used = max_iterations) and Exhausted.
inline MaskResult iterative_mask(const ImageRecord& record, const Image& source,
                                 const std::optional<std::filesystem::path>& on_disk,
                                 CanonicalClass target, DetectorContext ctx,
                                 const MaskConfig& cfg, const MaskObserver& observer = {}) {
  cfg.validate();
  MaskResult result;
  Image current = source;
  std::vector<BoundingBox> regions;

  auto finish = [&](int iterations_used) {
    MaskedImage m;
    m.masked_image_id = make_masked_image_id(record.image_id, target, iterations_used);
    m.parent = record.image_id;
    m.masked_class = target;
    m.mask_regions = regions;
    m.iterations_used = iterations_used;
    m.output_path = (std::filesystem::path(cfg.output_dir) / masked_file_name(m.masked_image_id))
                        .generic_string();
    m.width = source.width();
    m.height = source.height();
    result.status = MaskStatus::kMasked;
    result.masked = std::move(m);
    result.image = std::move(current);
    return std::move(result);
  };

  for (int round = 1; round <= cfg.max_iterations; ++round) {
    const std::string id =
        round == 1 ? record.image_id : make_masked_image_id(record.image_id, target, round - 1);
    auto found = detect_class(id, current, round == 1 ? on_disk : std::nullopt, target, ctx,
                              cfg.detect_threshold);
    result.rounds.push_back(MaskRound{round, found, {}});
    if (found.empty()) {
      if (round == 1) {
        result.status = MaskStatus::kNotDetected;
        result.image = std::move(current);
        return result;
      }
      return finish(round);
    }
    std::vector<BoundingBox> boxes;
    for (const auto& d : found) boxes.push_back(d.box);
    auto dilated = dilate_regions(boxes, cfg, current.width(), current.height());
    fill_regions(current, dilated, cfg.fill);
    regions.insert(regions.end(), dilated.begin(), dilated.end());
    result.rounds.back().regions = std::move(dilated);
    if (observer) observer(round, current);
  }

  const auto verify = detect_class(
      make_masked_image_id(record.image_id, target, cfg.max_iterations), current, std::nullopt,
      target, ctx, cfg.detect_threshold);
  result.rounds.push_back(MaskRound{cfg.max_iterations + 1, verify, {}});
  if (verify.empty()) return finish(cfg.max_iterations);
  result.status = MaskStatus::kExhausted;
  result.image = std::move(current);
  return result;
}

inline Json audit_json(const ImageRecord& record, CanonicalClass target, const MaskResult& r) {
  Json j;
  j["image_id"] = record.image_id;
  j["class"] = std::string(target.name());
  j["status"] = std::string(to_string(r.status));
  if (r.masked) j["masked_image_id"] = r.masked->masked_image_id;
  Json rounds = Json::array();
  for (const auto& round : r.rounds) {
    Json jr;
    jr["round"] = round.round;
    Json dets = Json::array();
    for (const auto& d : round.detections) {
      Json jd;
      jd["raw_label"] = d.raw_label;
      jd["box"] = RecordCodec<BoundingBox>::encode(d.box);
      jd["confidence"] = d.confidence;
      dets.push_back(std::move(jd));
    }
    jr["detections"] = std::move(dets);
    Json regions = Json::array();
    for (const auto& b : round.regions) regions.push_back(RecordCodec<BoundingBox>::encode(b));
    jr["regions"] = std::move(regions);
    rounds.push_back(std::move(jr));
  }
  j["rounds"] = std::move(rounds);
  return j;
}

}  // namespace hiiforge::mask
