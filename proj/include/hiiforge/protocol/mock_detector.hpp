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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/json_codec.hpp"
#include "hiiforge/core/jsonl.hpp"
#include "hiiforge/image/image.hpp"
#include "hiiforge/protocol/backend.hpp"

namespace hiiforge::protocol {

// Scripted detector whose answers depend only on the fixture and the pixels
// it is shown. Each scripted object is a chain of parts; the first part that
// is not occluded (fill-colored fraction below the occlusion threshold) is
// reported. Masking one part therefore reveals the next, which is how
// fixtures model detection gaps. Objects marked "occludable": false report
// their first part no matter what.
//
// Fixture:
//   {
//     "fill": [0, 0, 0],                 // optional, default black
//     "occlusion_threshold": 0.5,        // optional
//     "strict": false,                   // optional: unknown images -> error
//     "images": {
//       "<image_id>": {"objects": [
//         {"raw_label": "sink", "occludable": true,
//          "parts": [{"box": [x0, y0, x1, y1], "confidence": 0.8}, ...]}
//       ]}
//     }
//   }
//
// Requests are matched on image.image_id, falling back to the part before the
// first '#' so masked variants resolve to their source image's script.
// Objects are reported regardless of class_prompts; callers normalize labels.
class MockDetector final : public Detector {
 public:
  struct Part {
    BoundingBox box;
    double confidence = 0.0;
  };
  struct Object {
    std::string raw_label;
    bool occludable = true;
    std::vector<Part> parts;
  };

  explicit MockDetector(const Json& fixture) {
    if (field::has(fixture, "fill")) {
      const auto& f = fixture["fill"];
      if (!f.is_array() || f.size() != 3) throw ValidationError("fill", "expected [r, g, b]");
      fill_ = Rgb{f[0].get<std::uint8_t>(), f[1].get<std::uint8_t>(), f[2].get<std::uint8_t>()};
    }
    if (field::has(fixture, "occlusion_threshold"))
      occlusion_threshold_ = field::number(fixture, "occlusion_threshold");
    if (field::has(fixture, "strict")) strict_ = field::boolean(fixture, "strict");
    const Json& images = field::at(fixture, "images", "");
    for (const auto& [id, entry] : images.items()) {
      const std::string path = "images." + id + ".";
      std::vector<Object> objects;
      const Json& objs = field::array(entry, "objects", path);
      for (std::size_t i = 0; i < objs.size(); ++i) {
        const std::string opath = path + "objects[" + std::to_string(i) + "].";
        Object o;
        o.raw_label = field::string(objs[i], "raw_label", opath);
        if (field::has(objs[i], "occludable"))
          o.occludable = field::boolean(objs[i], "occludable", opath);
        const Json& parts = field::array(objs[i], "parts", opath);
        if (parts.empty()) throw ValidationError(opath + "parts", "must be non-empty");
        for (std::size_t k = 0; k < parts.size(); ++k) {
          const std::string ppath = opath + "parts[" + std::to_string(k) + "].";
          const Json& box = field::array(parts[k], "box", ppath);
          if (box.size() != 4) throw ValidationError(ppath + "box", "expected 4 integers");
          Part p;
          p.box = BoundingBox{box[0].get<int>(), box[1].get<int>(), box[2].get<int>(),
                              box[3].get<int>()};
          p.confidence = field::number(parts[k], "confidence", ppath);
          validate_confidence(p.confidence, ppath + "confidence");
          o.parts.push_back(p);
        }
        objects.push_back(std::move(o));
      }
      images_.emplace(id, std::move(objects));
    }
  }

  static MockDetector load(const std::filesystem::path& path) {
    return MockDetector(read_json_file(path));
  }

  Rgb fill() const noexcept { return fill_; }

  DetectResponse detect(const DetectRequest& request) override {
    validate(request);
    const auto* objects = find(request.image.image_id);
    DetectResponse response;
    if (!objects) {
      if (strict_) throw ProtocolError("mock detector has no script for '" + request.image.image_id + "'");
      return response;
    }
    const Image image = load_image(request.image);
    for (const auto& o : *objects) {
      const Part* shown = nullptr;
      for (const auto& p : o.parts) {
        if (!o.occludable || fill_fraction(image, p.box, fill_) < occlusion_threshold_) {
          shown = &p;
          break;
        }
      }
      if (!shown || shown->confidence < request.box_threshold) continue;
      response.detections.push_back(RawDetection{
          o.raw_label,
          WireBox{static_cast<double>(shown->box.x_min), static_cast<double>(shown->box.y_min),
                  static_cast<double>(shown->box.x_max), static_cast<double>(shown->box.y_max)},
          shown->confidence});
    }
    return response;
  }

 private:
  const std::vector<Object>* find(const std::string& image_id) const {
    auto it = images_.find(image_id);
    if (it == images_.end()) {
      const auto hash = image_id.find('#');
      if (hash != std::string::npos) it = images_.find(image_id.substr(0, hash));
    }
    return it == images_.end() ? nullptr : &it->second;
  }

  Rgb fill_{};
  double occlusion_threshold_ = 0.5;
  bool strict_ = false;
  std::map<std::string, std::vector<Object>> images_;
};

}  // namespace hiiforge::protocol
