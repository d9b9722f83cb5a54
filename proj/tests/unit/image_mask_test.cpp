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

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "hiiforge/image/image.hpp"
#include "hiiforge/lexicon/dictionary.hpp"
#include "hiiforge/mask/mask_forge.hpp"
#include "hiiforge/protocol/mock_detector.hpp"
#include "test_support.hpp"

namespace hiiforge::mask {
namespace {

using testing::detector_object;
using testing::paint;

constexpr Rgb kBackground{200, 200, 200};
constexpr Rgb kObject{30, 90, 160};

CanonicalClass C(std::string_view name) { return CanonicalClass::from_name(name); }

TEST(Png, RoundTripsThroughMemoryAndDisk) {
  Image img(7, 5, kBackground);
  img.set(6, 4, Rgb{1, 2, 3});
  EXPECT_EQ(decode_png(encode_png(img)), img);
  testing::TempDir dir("png");
  save_png(img, dir / "sub/a.png");
  EXPECT_EQ(load_png(dir / "sub/a.png"), img);
  EXPECT_THROW(load_png(dir / "missing.png"), ImageIoError);
  const std::vector<std::uint8_t> junk{1, 2, 3};
  EXPECT_THROW(decode_png(junk), ImageIoError);
}

TEST(Geometry, DilatePadsByCeilFractionAndClamps) {
  // ceil(0.02 * 96) = 2
  EXPECT_EQ(dilate(BoundingBox{10, 30, 40, 60}, 0.02, 96, 72), (BoundingBox{8, 28, 42, 62}));
  EXPECT_EQ(dilate(BoundingBox{0, 0, 96, 72}, 0.02, 96, 72), (BoundingBox{0, 0, 96, 72}));
  EXPECT_EQ(dilate(BoundingBox{10, 10, 20, 20}, 0.0, 96, 72), (BoundingBox{10, 10, 20, 20}));
  // 0.05 * 100 = 5 exactly, not 6
  EXPECT_EQ(dilate(BoundingBox{10, 10, 20, 20}, 0.05, 100, 50), (BoundingBox{5, 5, 25, 25}));
}

TEST(Geometry, ClampBox) {
  BoundingBox b{-5, -5, 3, 200};
  EXPECT_TRUE(clamp_box(b, 10, 10));
  EXPECT_EQ(b, (BoundingBox{0, 0, 3, 10}));
  BoundingBox off{20, 20, 30, 30};
  EXPECT_FALSE(clamp_box(off, 10, 10));
}

TEST(Geometry, FillRegionsTouchesOnlyRegions) {
  Image img(10, 10, kBackground);
  const std::vector<BoundingBox> regions{{1, 1, 3, 3}, {2, 2, 5, 4}};
  fill_regions(img, regions, Rgb{0, 0, 0});
  int filled = 0;
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      const bool inside = regions[0].contains(x, y) || regions[1].contains(x, y);
      EXPECT_EQ(img.at(x, y) == Rgb{}, inside);
      filled += inside;
    }
  }
  EXPECT_EQ(filled, 4 + 6 - 1);
  EXPECT_DOUBLE_EQ(fill_fraction(img, BoundingBox{1, 1, 3, 3}, Rgb{}), 1.0);
  EXPECT_DOUBLE_EQ(fill_fraction(img, BoundingBox{0, 0, 2, 2}, Rgb{}), 0.25);
  const std::vector<BoundingBox> outside{{8, 8, 11, 9}};
  EXPECT_THROW(fill_regions(img, outside, Rgb{}), ValidationError);
}

struct Scenario {
  ImageRecord record{"s1", "s1.png", 64, 48, std::nullopt};
  Image image{64, 48, kBackground};
  Json objects = Json::array();

  void add(const std::string& label, std::vector<std::pair<BoundingBox, double>> parts,
           bool occludable = true) {
    for (const auto& [b, c] : parts) paint(image, b, kObject);
    objects.push_back(detector_object(label, parts, occludable));
  }

  protocol::MockDetector detector() const {
    return protocol::MockDetector(Json{{"images", {{record.image_id, {{"objects", objects}}}}}});
  }
};

const lexicon::SynonymDictionary& dict() {
  static const auto d = lexicon::SynonymDictionary::load(testing::shipped_dictionary());
  return d;
}

TEST(IterativeMask, SinglePartClearsAfterOneRound) {
  Scenario s;
  s.add("puppy", {{BoundingBox{10, 10, 20, 20}, 0.8}});
  auto det = s.detector();
  const MaskConfig cfg;
  const auto r = iterative_mask(s.record, s.image, std::nullopt, C("dog"), {det, dict()}, cfg);
  ASSERT_EQ(r.status, MaskStatus::kMasked);
  EXPECT_EQ(r.masked->masked_image_id, "s1#dog#2");
  EXPECT_EQ(r.masked->iterations_used, 2);
  EXPECT_EQ(r.masked->output_path, "masked/s1__dog__2.png");
  // pad = ceil(0.02 * 64) = 2
  EXPECT_EQ(r.masked->mask_regions, (std::vector<BoundingBox>{{8, 8, 22, 22}}));
  EXPECT_EQ(r.rounds.size(), 2u);
  EXPECT_TRUE(detect_class("s1#dog#2", r.image, std::nullopt, C("dog"), {det, dict()}, cfg.detect_threshold).empty());
}

TEST(IterativeMask, PartChainNeedsSeveralRounds) {
  Scenario s;
  s.add("sink", {{BoundingBox{2, 2, 10, 10}, 0.9}, {BoundingBox{20, 2, 28, 10}, 0.7}, {BoundingBox{40, 2, 48, 10}, 0.6}});
  auto det = s.detector();
  const auto r = iterative_mask(s.record, s.image, std::nullopt, C("sink"), {det, dict()}, MaskConfig{});
  ASSERT_EQ(r.status, MaskStatus::kMasked);
  EXPECT_EQ(r.masked->iterations_used, 4);
  EXPECT_EQ(r.masked->mask_regions.size(), 3u);
}

TEST(IterativeMask, FiveRoundsThenVerification) {
  Scenario s;
  std::vector<std::pair<BoundingBox, double>> parts;
  for (int i = 0; i < 5; ++i) parts.push_back({BoundingBox{2 + 12 * i, 2, 8 + 12 * i, 8}, 0.8});
  s.add("cup", parts);
  auto det = s.detector();
  const auto r = iterative_mask(s.record, s.image, std::nullopt, C("cup"), {det, dict()}, MaskConfig{});
  ASSERT_EQ(r.status, MaskStatus::kMasked);
  EXPECT_EQ(r.masked->iterations_used, 5);
  EXPECT_EQ(r.rounds.size(), 6u);

  Scenario longer;
  parts.push_back({BoundingBox{2, 30, 8, 36}, 0.8});
  longer.add("cup", parts);
  auto det2 = longer.detector();
  const auto r2 = iterative_mask(longer.record, longer.image, std::nullopt, C("cup"), {det2, dict()}, MaskConfig{});
  EXPECT_EQ(r2.status, MaskStatus::kExhausted);
  EXPECT_FALSE(r2.masked);
}

TEST(IterativeMask, NeverClearsIsExhausted) {
  Scenario s;
  s.add("chair", {{BoundingBox{5, 5, 30, 30}, 0.7}}, false);
  auto det = s.detector();
  int observed = 0;
  const auto r = iterative_mask(s.record, s.image, std::nullopt, C("chair"), {det, dict()}, MaskConfig{},
                                [&](int, const Image&) { ++observed; });
  EXPECT_EQ(r.status, MaskStatus::kExhausted);
  EXPECT_EQ(observed, 5);
  EXPECT_EQ(r.rounds.size(), 6u);
}

TEST(IterativeMask, AbsentTargetIsNotDetected) {
  Scenario s;
  s.add("sink", {{BoundingBox{5, 5, 30, 30}, 0.7}});
  auto det = s.detector();
  const auto r = iterative_mask(s.record, s.image, std::nullopt, C("dog"), {det, dict()}, MaskConfig{});
  EXPECT_EQ(r.status, MaskStatus::kNotDetected);
  EXPECT_EQ(r.image, s.image);
}

TEST(IterativeMask, BelowThresholdDetectionsAreIgnored) {
  Scenario s;
  s.add("sink", {{BoundingBox{5, 5, 30, 30}, 0.34}});
  auto det = s.detector();
  const auto r = iterative_mask(s.record, s.image, std::nullopt, C("sink"), {det, dict()}, MaskConfig{});
  EXPECT_EQ(r.status, MaskStatus::kNotDetected);
  MaskConfig low;
  low.detect_threshold = 0.3;
  EXPECT_EQ(iterative_mask(s.record, s.image, std::nullopt, C("sink"), {det, dict()}, low).status,
            MaskStatus::kMasked);
}

TEST(IterativeMask, OtherPixelsAreUntouched) {
  Scenario s;
  s.add("sink", {{BoundingBox{5, 5, 20, 20}, 0.9}});
  s.add("cup", {{BoundingBox{40, 20, 50, 30}, 0.9}});
  auto det = s.detector();
  const auto r = iterative_mask(s.record, s.image, std::nullopt, C("sink"), {det, dict()}, MaskConfig{});
  ASSERT_EQ(r.status, MaskStatus::kMasked);
  for (int y = 0; y < s.image.height(); ++y) {
    for (int x = 0; x < s.image.width(); ++x) {
      bool masked = false;
      for (const auto& b : r.masked->mask_regions) masked = masked || b.contains(x, y);
      ASSERT_EQ(r.image.at(x, y), masked ? Rgb{} : s.image.at(x, y));
    }
  }
}

TEST(IterativeMask, RejectsBadConfig) {
  Scenario s;
  auto det = s.detector();
  MaskConfig cfg;
  cfg.max_iterations = 0;
  EXPECT_THROW(iterative_mask(s.record, s.image, std::nullopt, C("dog"), {det, dict()}, cfg), ValidationError);
  cfg = MaskConfig{};
  cfg.detect_threshold = 1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(DetectCandidates, GroupsByClassAboveThreshold) {
  Scenario s;
  s.add("puppy", {{BoundingBox{2, 2, 10, 10}, 0.8}});
  s.add("beagle", {{BoundingBox{20, 2, 28, 10}, 0.5}});
  s.add("sink", {{BoundingBox{40, 2, 48, 10}, 0.2}});
  s.add("zeppelin", {{BoundingBox{2, 30, 10, 40}, 0.9}});
  s.add("person", {{BoundingBox{20, 30, 28, 40}, 0.9}});
  auto det = s.detector();
  const auto c = detect_candidates(s.record, s.image, std::nullopt, {det, dict()}, MaskConfig{});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].cls, C("person"));
  EXPECT_EQ(c[1].cls, C("dog"));
  EXPECT_EQ(c[1].detections.size(), 2u);
}

TEST(NormalizeDetections, DropsUnknownLabelsAndOffImageBoxes) {
  protocol::DetectResponse resp;
  resp.detections = {{"puppy", {1.5, 2.5, 9.2, 9.9}, 0.8},
                     {"zeppelin", {1, 1, 5, 5}, 0.9},
                     {"cat", {100, 100, 120, 120}, 0.9}};
  const auto d = normalize_detections(resp, dict(), 64, 48);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].canonical_class, C("dog"));
  EXPECT_EQ(d[0].box, (BoundingBox{1, 2, 10, 10}));
}

TEST(MaskedFileName, IsFilesystemSafe) {
  EXPECT_EQ(masked_file_name("img 1/x#dining table#2"), "img_1_x__dining_table__2.png");
}

}  // namespace
}  // namespace hiiforge::mask
