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

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "hiiforge/core/error.hpp"

namespace hiiforge {

inline constexpr std::size_t kNumClasses = 80;

// MS-COCO 2014 category names, in the dataset's canonical order.
inline constexpr std::array<std::string_view, kNumClasses> kCocoClassNames = {
    "person",        "bicycle",      "car",           "motorcycle",
    "airplane",      "bus",          "train",         "truck",
    "boat",          "traffic light", "fire hydrant", "stop sign",
    "parking meter", "bench",        "bird",          "cat",
    "dog",           "horse",        "sheep",         "cow",
    "elephant",      "bear",         "zebra",         "giraffe",
    "backpack",      "umbrella",     "handbag",       "tie",
    "suitcase",      "frisbee",      "skis",          "snowboard",
    "sports ball",   "kite",         "baseball bat",  "baseball glove",
    "skateboard",    "surfboard",    "tennis racket", "bottle",
    "wine glass",    "cup",          "fork",          "knife",
    "spoon",         "bowl",         "banana",        "apple",
    "sandwich",      "orange",       "broccoli",      "carrot",
    "hot dog",       "pizza",        "donut",         "cake",
    "chair",         "couch",        "potted plant",  "bed",
    "dining table",  "toilet",       "tv",            "laptop",
    "mouse",         "remote",       "keyboard",      "cell phone",
    "microwave",     "oven",         "toaster",       "sink",
    "refrigerator",  "book",         "clock",         "vase",
    "scissors",      "teddy bear",   "hair drier",    "toothbrush",
};

// One of the 80 canonical object classes. Ordering follows the vocabulary
// order, not the name.
class CanonicalClass {
 public:
  static std::optional<CanonicalClass> find(std::string_view name) {
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      if (kCocoClassNames[i] == name) return CanonicalClass(static_cast<std::uint8_t>(i));
    }
    return std::nullopt;
  }

  static CanonicalClass from_name(std::string_view name) {
    if (auto c = find(name)) return *c;
    throw ValidationError("class", "unknown canonical class '" + std::string(name) + "'");
  }

  static CanonicalClass from_index(std::size_t index) {
    if (index >= kNumClasses) {
      throw ValidationError("class", "class index out of range: " + std::to_string(index));
    }
    return CanonicalClass(static_cast<std::uint8_t>(index));
  }

  std::string_view name() const noexcept { return kCocoClassNames[index_]; }
  std::size_t index() const noexcept { return index_; }

  friend auto operator<=>(CanonicalClass, CanonicalClass) = default;

 private:
  explicit constexpr CanonicalClass(std::uint8_t index) : index_(index) {}
  std::uint8_t index_;
};

inline constexpr std::size_t kNumScenes = 10;

enum class Scene : std::uint8_t {
  kWaterfront,
  kStreet,
  kRailroad,
  kOffice,
  kDiningRoom,
  kKitchen,
  kBathroom,
  kSkiResort,
  kOtherOutdoor,
  kOtherIndoor,
};

inline constexpr std::array<std::string_view, kNumScenes> kSceneNames = {
    "Waterfront", "Street",   "Railroad",  "Office",       "DiningRoom",
    "Kitchen",    "Bathroom", "SkiResort", "OtherOutdoor", "OtherIndoor",
};

inline std::string_view to_string(Scene scene) {
  return kSceneNames[static_cast<std::size_t>(scene)];
}

inline std::optional<Scene> find_scene(std::string_view name) {
  for (std::size_t i = 0; i < kNumScenes; ++i) {
    if (kSceneNames[i] == name) return static_cast<Scene>(i);
  }
  return std::nullopt;
}

inline Scene parse_scene(std::string_view name) {
  if (auto s = find_scene(name)) return *s;
  throw ValidationError("scene", "unknown scene label '" + std::string(name) + "'");
}

}  // namespace hiiforge
