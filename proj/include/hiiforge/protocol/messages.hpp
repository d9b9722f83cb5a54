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
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/json_codec.hpp"
#include "hiiforge/core/records.hpp"

// Wire schemas for the three model-service endpoints:
//
//   POST /v1/detect    DetectRequest   -> DetectResponse
//   POST /v1/generate  GenerateRequest -> GenerateResponse
//   POST /v1/logprob   LogprobRequest  -> LogprobResponse
//
// Errors are answered with {"error": {"code": <string>, "message": <string>}}.
// Every decode_* function checks the full schema (required fields, types,
// ranges, no unknown fields) and throws ValidationError on violation.
namespace hiiforge::protocol {

// {"image_id": str, "path": str} or {"image_id": str, "base64": str}.
// image_id is an opaque reference used for logging and fixture lookup.
struct ImageRef {
  std::string image_id;
  std::optional<std::string> path;
  std::optional<std::string> base64;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct DetectRequest {
  ImageRef image;
  std::vector<std::string> class_prompts;
  double box_threshold = 0.35;

  friend bool operator==(const DetectRequest&, const DetectRequest&) = default;
};

// Detector boxes are real-valued pixel coordinates on the wire.
struct WireBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  friend bool operator==(const WireBox&, const WireBox&) = default;
};

struct RawDetection {
  std::string raw_label;
  WireBox box;
  double confidence = 0.0;

  friend bool operator==(const RawDetection&, const RawDetection&) = default;
};

struct DetectResponse {
  std::vector<RawDetection> detections;
  friend bool operator==(const DetectResponse&, const DetectResponse&) = default;
};

enum class DecodeMode { kSample, kGreedy };

// "response" asks for a full answer; "sentence" asks for the single next
// sentence continuing `prefix`.
enum class Granularity { kResponse, kSentence };

struct GenerateRequest {
  ImageRef image;
  std::string prompt;
  std::string prefix;
  DecodeMode mode = DecodeMode::kGreedy;
  int n = 1;
  double temperature = 1.0;
  double top_p = 1.0;
  int max_tokens = 512;
  std::uint64_t seed = 0;
  Granularity granularity = Granularity::kResponse;

  friend bool operator==(const GenerateRequest&, const GenerateRequest&) = default;
};

struct GenerateResponse {
  std::vector<std::string> responses;
  friend bool operator==(const GenerateResponse&, const GenerateResponse&) = default;
};

struct LogprobRequest {
  ImageRef image;
  std::string prompt;
  std::string completion;

  friend bool operator==(const LogprobRequest&, const LogprobRequest&) = default;
};

struct LogprobResponse {
  double logprob = 0.0;
  friend bool operator==(const LogprobResponse&, const LogprobResponse&) = default;
};

// ---------------------------------------------------------------------------
// Schema checks

namespace schema {

enum class Kind { kString, kNumber, kInteger, kUnsigned, kBoolean, kArray, kObject };

struct Field {
  std::string_view name;
  Kind kind;
  bool required = true;
};

inline bool matches(const Json& v, Kind kind) {
  switch (kind) {
    case Kind::kString: return v.is_string();
    case Kind::kNumber: return v.is_number();
    case Kind::kInteger: return v.is_number_integer();
    case Kind::kUnsigned: return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case Kind::kBoolean: return v.is_boolean();
    case Kind::kArray: return v.is_array();
    case Kind::kObject: return v.is_object();
  }
  return false;
}

inline void check_object(const Json& j, std::initializer_list<Field> fields,
                         const std::string& path) {
  if (!j.is_object()) throw ValidationError(path.empty() ? "<root>" : path, "expected object");
  for (const auto& f : fields) {
    auto it = j.find(f.name);
    if (it == j.end()) {
      if (f.required) throw ValidationError(path + std::string(f.name), "missing");
      continue;
    }
    if (!matches(*it, f.kind)) throw ValidationError(path + std::string(f.name), "wrong type");
  }
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const auto& f : fields) known = known || f.name == key;
    if (!known) throw ValidationError(path + key, "unknown field");
  }
}

inline void check_unit_open(double v, const std::string& field) {
  if (!(v > 0.0 && v < 1.0)) throw ValidationError(field, "must lie in (0, 1)");
}

}  // namespace schema

// ---------------------------------------------------------------------------
// Semantic request invariants, shared by client and server.

inline void validate(const ImageRef& ref, const std::string& path = "image.") {
  if (ref.image_id.empty()) throw ValidationError(path + "image_id", "must be non-empty");
  if (ref.path.has_value() == ref.base64.has_value())
    throw ValidationError(path + "path", "exactly one of path or base64 is required");
  if (ref.path && ref.path->empty()) throw ValidationError(path + "path", "must be non-empty");
  if (ref.base64 && ref.base64->empty())
    throw ValidationError(path + "base64", "must be non-empty");
}

inline void validate(const DetectRequest& r) {
  validate(r.image);
  if (r.class_prompts.empty()) throw ValidationError("class_prompts", "must be non-empty");
  for (std::size_t i = 0; i < r.class_prompts.size(); ++i) {
    if (r.class_prompts[i].empty())
      throw ValidationError("class_prompts[" + std::to_string(i) + "]", "must be non-empty");
  }
  schema::check_unit_open(r.box_threshold, "box_threshold");
}

inline void validate(const GenerateRequest& r) {
  validate(r.image);
  if (r.prompt.empty()) throw ValidationError("prompt", "must be non-empty");
  if (r.n < 1) throw ValidationError("n", "must be >= 1");
  if (r.mode == DecodeMode::kGreedy && r.n != 1)
    throw ValidationError("n", "greedy decoding requires n = 1");
  if (!(r.temperature > 0.0) || !std::isfinite(r.temperature))
    throw ValidationError("temperature", "must be a positive real");
  if (!(r.top_p > 0.0 && r.top_p <= 1.0)) throw ValidationError("top_p", "must lie in (0, 1]");
  if (r.max_tokens < 1) throw ValidationError("max_tokens", "must be >= 1");
}

inline void validate(const LogprobRequest& r) {
  validate(r.image);
  if (r.prompt.empty()) throw ValidationError("prompt", "must be non-empty");
  if (r.completion.empty()) throw ValidationError("completion", "must be non-empty");
}

inline void validate(const RawDetection& d, const std::string& path) {
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
    throw ValidationError(path + "confidence", "must lie in [0, 1]");
  const auto& b = d.box;
  if (!std::isfinite(b.x_min) || !std::isfinite(b.y_min) || !std::isfinite(b.x_max) ||
      !std::isfinite(b.y_max))
    throw ValidationError(path + "box", "coordinates must be finite");
  if (!(b.x_max > b.x_min && b.y_max > b.y_min))
    throw ValidationError(path + "box", "must have positive extent");
}

inline void validate(const DetectResponse& r) {
  for (std::size_t i = 0; i < r.detections.size(); ++i) {
    validate(r.detections[i], "detections[" + std::to_string(i) + "].");
  }
}

inline void validate(const LogprobResponse& r) {
  if (!std::isfinite(r.logprob)) throw ValidationError("logprob", "must be finite");
}

// ---------------------------------------------------------------------------
// Encoding

inline std::string_view to_string(DecodeMode m) { return m == DecodeMode::kGreedy ? "greedy" : "sample"; }
inline std::string_view to_string(Granularity g) {
  return g == Granularity::kSentence ? "sentence" : "response";
}

inline Json encode(const ImageRef& ref) {
  Json j;
  j["image_id"] = ref.image_id;
  if (ref.path) j["path"] = *ref.path;
  if (ref.base64) j["base64"] = *ref.base64;
  return j;
}

inline ImageRef decode_image_ref(const Json& j, const std::string& path = "image.") {
  schema::check_object(j, {{"image_id", schema::Kind::kString},
                           {"path", schema::Kind::kString, false},
                           {"base64", schema::Kind::kString, false}},
                       path);
  ImageRef ref;
  ref.image_id = j["image_id"].get<std::string>();
  if (j.contains("path")) ref.path = j["path"].get<std::string>();
  if (j.contains("base64")) ref.base64 = j["base64"].get<std::string>();
  validate(ref, path);
  return ref;
}

inline Json encode(const DetectRequest& r) {
  Json j;
  j["image"] = encode(r.image);
  j["class_prompts"] = r.class_prompts;
  j["box_threshold"] = r.box_threshold;
  return j;
}

inline DetectRequest decode_detect_request(const Json& j) {
  schema::check_object(j, {{"image", schema::Kind::kObject},
                           {"class_prompts", schema::Kind::kArray},
                           {"box_threshold", schema::Kind::kNumber}},
                       "");
  DetectRequest r;
  r.image = decode_image_ref(j["image"]);
  r.class_prompts = field::strings(j, "class_prompts");
  r.box_threshold = j["box_threshold"].get<double>();
  validate(r);
  return r;
}

inline Json encode(const DetectResponse& r) {
  Json dets = Json::array();
  for (const auto& d : r.detections) {
    Json jd;
    jd["raw_label"] = d.raw_label;
    jd["box"] = Json::array({d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max});
    jd["confidence"] = d.confidence;
    dets.push_back(std::move(jd));
  }
  Json j;
  j["detections"] = std::move(dets);
  return j;
}

inline DetectResponse decode_detect_response(const Json& j) {
  schema::check_object(j, {{"detections", schema::Kind::kArray}}, "");
  DetectResponse r;
  const auto& arr = j["detections"];
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "detections[" + std::to_string(i) + "].";
    schema::check_object(arr[i], {{"raw_label", schema::Kind::kString},
                                  {"box", schema::Kind::kArray},
                                  {"confidence", schema::Kind::kNumber}},
                         path);
    const auto& box = arr[i]["box"];
    if (box.size() != 4) throw ValidationError(path + "box", "expected 4 numbers");
    for (const auto& v : box) {
      if (!v.is_number()) throw ValidationError(path + "box", "expected 4 numbers");
    }
    RawDetection d;
    d.raw_label = arr[i]["raw_label"].get<std::string>();
    d.box = WireBox{box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
                    box[3].get<double>()};
    d.confidence = arr[i]["confidence"].get<double>();
    validate(d, path);
    r.detections.push_back(std::move(d));
  }
  return r;
}

inline Json encode(const GenerateRequest& r) {
  Json j;
  j["image"] = encode(r.image);
  j["prompt"] = r.prompt;
  j["prefix"] = r.prefix;
  j["mode"] = std::string(to_string(r.mode));
  j["n"] = r.n;
  j["temperature"] = r.temperature;
  j["top_p"] = r.top_p;
  j["max_tokens"] = r.max_tokens;
  j["seed"] = r.seed;
  j["granularity"] = std::string(to_string(r.granularity));
  return j;
}

inline GenerateRequest decode_generate_request(const Json& j) {
  schema::check_object(j, {{"image", schema::Kind::kObject},
                           {"prompt", schema::Kind::kString},
                           {"prefix", schema::Kind::kString, false},
                           {"mode", schema::Kind::kString},
                           {"n", schema::Kind::kInteger},
                           {"temperature", schema::Kind::kNumber},
                           {"top_p", schema::Kind::kNumber},
                           {"max_tokens", schema::Kind::kInteger},
                           {"seed", schema::Kind::kUnsigned},
                           {"granularity", schema::Kind::kString, false}},
                       "");
  GenerateRequest r;
  r.image = decode_image_ref(j["image"]);
  r.prompt = j["prompt"].get<std::string>();
  if (j.contains("prefix")) r.prefix = j["prefix"].get<std::string>();
  const auto mode = j["mode"].get<std::string>();
  if (mode == "greedy") {
    r.mode = DecodeMode::kGreedy;
  } else if (mode == "sample") {
    r.mode = DecodeMode::kSample;
  } else {
    throw ValidationError("mode", "must be 'sample' or 'greedy'");
  }
  r.n = field::int32(j, "n");
  r.temperature = j["temperature"].get<double>();
  r.top_p = j["top_p"].get<double>();
  r.max_tokens = field::int32(j, "max_tokens");
  r.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("granularity")) {
    const auto g = j["granularity"].get<std::string>();
    if (g == "sentence") {
      r.granularity = Granularity::kSentence;
    } else if (g == "response") {
      r.granularity = Granularity::kResponse;
    } else {
      throw ValidationError("granularity", "must be 'response' or 'sentence'");
    }
  }
  validate(r);
  return r;
}

inline Json encode(const GenerateResponse& r) {
  Json j;
  j["responses"] = r.responses;
  return j;
}

inline GenerateResponse decode_generate_response(const Json& j) {
  schema::check_object(j, {{"responses", schema::Kind::kArray}}, "");
  return GenerateResponse{field::strings(j, "responses")};
}

inline Json encode(const LogprobRequest& r) {
  Json j;
  j["image"] = encode(r.image);
  j["prompt"] = r.prompt;
  j["completion"] = r.completion;
  return j;
}

inline LogprobRequest decode_logprob_request(const Json& j) {
  schema::check_object(j, {{"image", schema::Kind::kObject},
                           {"prompt", schema::Kind::kString},
                           {"completion", schema::Kind::kString}},
                       "");
  LogprobRequest r;
  r.image = decode_image_ref(j["image"]);
  r.prompt = j["prompt"].get<std::string>();
  r.completion = j["completion"].get<std::string>();
  validate(r);
  return r;
}

inline Json encode(const LogprobResponse& r) {
  Json j;
  j["logprob"] = r.logprob;
  return j;
}

inline LogprobResponse decode_logprob_response(const Json& j) {
  schema::check_object(j, {{"logprob", schema::Kind::kNumber}}, "");
  LogprobResponse r{j["logprob"].get<double>()};
  validate(r);
  return r;
}

inline Json error_body(std::string_view code, std::string_view message) {
  Json inner;
  inner["code"] = std::string(code);
  inner["message"] = std::string(message);
  Json j;
  j["error"] = std::move(inner);
  return j;
}

// Converts a wire box to pixels (floor/ceil), clamped to the image. Returns
// nullopt when nothing of the box lies inside the image.
inline std::optional<BoundingBox> to_pixel_box(const WireBox& b, int width, int height) {
  BoundingBox out{static_cast<int>(std::floor(std::max(0.0, b.x_min))),
                  static_cast<int>(std::floor(std::max(0.0, b.y_min))),
                  static_cast<int>(std::ceil(std::min<double>(width, b.x_max))),
                  static_cast<int>(std::ceil(std::min<double>(height, b.y_max)))};
  if (out.x_min >= out.x_max || out.y_min >= out.y_max) return std::nullopt;
  return out;
}

}  // namespace hiiforge::protocol
