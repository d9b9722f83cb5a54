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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/hashing.hpp"
#include "hiiforge/image/image.hpp"
#include "hiiforge/protocol/messages.hpp"

namespace hiiforge::protocol {

// Open-vocabulary detector service. Implementations must be safe to call
// from several threads at once.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual DetectResponse detect(const DetectRequest& request) = 0;
};

// Vision-language model service. Same threading contract as Detector.
class VisionLanguageModel {
 public:
  virtual ~VisionLanguageModel() = default;
  virtual GenerateResponse generate(const GenerateRequest& request) = 0;
  virtual LogprobResponse logprob(const LogprobRequest& request) = 0;
};

enum class ImageTransport { kPath, kBase64 };

// Sends by path when the transport allows it and the image exists on disk;
// otherwise inlines the PNG bytes.
inline ImageRef make_image_ref(std::string image_id, const Image& image,
                               const std::optional<std::filesystem::path>& on_disk,
                               ImageTransport transport) {
  ImageRef ref;
  ref.image_id = std::move(image_id);
  if (transport == ImageTransport::kPath && on_disk) {
    ref.path = std::filesystem::absolute(*on_disk).string();
  } else {
    ref.base64 = base64_encode(encode_png(image));
  }
  return ref;
}

inline Image load_image(const ImageRef& ref) {
  if (ref.path) return load_png(*ref.path);
  if (ref.base64) return decode_png(base64_decode(*ref.base64));
  throw ValidationError("image", "no image payload");
}

// Client-side wrapper: rejects invalid requests before they leave the
// process, validates the reply and keeps only detections at or above the
// threshold.
inline DetectResponse detect(Detector& client, const DetectRequest& request) {
  validate(request);
  DetectResponse response = client.detect(request);
  try {
    validate(response);
  } catch (const ValidationError& e) {
    throw ProtocolError(std::string("malformed detect response: ") + e.what());
  }
  std::erase_if(response.detections, [&](const RawDetection& d) {
    return d.confidence < request.box_threshold;
  });
  return response;
}

inline GenerateResponse generate(VisionLanguageModel& client, const GenerateRequest& request) {
  validate(request);
  GenerateResponse response = client.generate(request);
  if (response.responses.size() != static_cast<std::size_t>(request.n)) {
    throw ProtocolError("generate returned " + std::to_string(response.responses.size()) +
                        " responses, expected " + std::to_string(request.n));
  }
  return response;
}

inline double logprob(VisionLanguageModel& client, const LogprobRequest& request) {
  validate(request);
  const LogprobResponse response = client.logprob(request);
  if (!std::isfinite(response.logprob)) throw ProtocolError("logprob is not finite");
  return response.logprob;
}

}  // namespace hiiforge::protocol
