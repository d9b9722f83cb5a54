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

#include <algorithm>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "hiiforge/prefs/pref_builder.hpp"
#include "hiiforge/prefs/segmenter.hpp"
#include "hiiforge/protocol/mock_detector.hpp"
#include "hiiforge/protocol/mock_vlm.hpp"
#include "test_support.hpp"

namespace hiiforge::prefs {
namespace {

CanonicalClass C(std::string_view name) { return CanonicalClass::from_name(name); }

using Strings = std::vector<std::string>;

const lexicon::SynonymDictionary& dict() {
  static const auto d = lexicon::SynonymDictionary::load(testing::shipped_dictionary());
  return d;
}

TEST(Segmenter, SplitsAfterTerminators) {
  EXPECT_EQ(segment_sentences("A cat. A dog! Why? "), (Strings{"A cat.", " A dog!", " Why?", " "}));
  EXPECT_EQ(segment_sentences("Version 2.5 is out."), (Strings{"Version 2.5 is out."}));
  EXPECT_EQ(segment_sentences("No terminator"), (Strings{"No terminator"}));
  EXPECT_TRUE(segment_sentences("").empty());
}

TEST(Segmenter, InitialsDoNotEndSentences) {
  EXPECT_EQ(segment_sentences("Mr. A sat."), (Strings{"Mr.", " A sat."}));
  EXPECT_EQ(segment_sentences("J. R. R. Tolkien wrote it. Then he slept."),
            (Strings{"J. R. R. Tolkien wrote it.", " Then he slept."}));
  EXPECT_EQ(segment_sentences("I saw plan B. Then C."), (Strings{"I saw plan B. Then C."}));
}

TEST(Segmenter, ConcatenationIsLossless) {
  const std::string alphabet = "ab .!?\n\tAZ9\xc3\xa9";
  SplitMix64 rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text;
    const auto len = rng.below(40);
    for (std::uint64_t i = 0; i < len; ++i) text += alphabet[rng.below(alphabet.size())];
    std::string joined;
    for (const auto& s : segment_sentences(text)) {
      ASSERT_FALSE(s.empty());
      joined += s;
    }
    ASSERT_EQ(joined, text);
  }
}

TEST(NextSentence, TakesFirstSegmentAndFixesTheJoin) {
  EXPECT_EQ(next_sentence("A cup. More text.", ""), "A cup.");
  EXPECT_EQ(next_sentence(" A cup.", "Intro."), " A cup.");
  EXPECT_EQ(next_sentence("A cup.", "Intro."), " A cup.");
  EXPECT_EQ(next_sentence("A cup.", "Intro. "), "A cup.");
  EXPECT_EQ(next_sentence("", "Intro."), "");
  EXPECT_EQ(next_sentence("   ", "Intro."), "");
}

TEST(DrawPrompts, DistinctSeededAndInRange) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto p = draw_prompts(6, 3, seed);
    ASSERT_EQ(p.size(), 3u);
    ASSERT_EQ(std::set<int>(p.begin(), p.end()).size(), 3u);
    for (int i : p) ASSERT_TRUE(i >= 0 && i < 6);
    ASSERT_EQ(p, draw_prompts(6, 3, seed));
  }
  auto all = draw_prompts(6, 6, 1);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, (std::vector<int>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(draw_prompts(6, 9, 1).size(), 6u);
}

TEST(PairId, HashOfHiiPromptAndStep) {
  EXPECT_EQ(make_pair_id("img01#sink#2", 1, 0), "781a8e7f4e8f8a9c");
  EXPECT_NE(make_pair_id("img01#sink#2", 1, 1), make_pair_id("img01#sink#2", 1, 0));
}

TEST(Config, Validation) {
  PrefConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.prompts_per_hii = 7;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = PrefConfig{};
  cfg.candidates_per_step = 1;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

// HII of a kitchen with its sink masked out. The detector sees a cup (0.8)
// and an oven at exactly the verification threshold.
struct Scenario {
  testing::TempDir dir{"prefs"};
  HiiRecord hii;
  filter::ImageAccess access;
  Json objects = Json::array();

  Scenario() {
    MaskedImage m;
    m.parent = "img01";
    m.masked_class = C("sink");
    m.iterations_used = 2;
    m.masked_image_id = "img01#sink#2";
    m.mask_regions = {BoundingBox{0, 0, 10, 10}};
    m.output_path = "masked/img01__sink__2.png";
    m.width = 40;
    m.height = 30;
    save_png(Image(40, 30, Rgb{120, 120, 120}), dir / m.output_path);
    hii = HiiRecord{m, "modelA", 10, 6, 0.6};
    access = filter::ImageAccess{dir.path(), protocol::ImageTransport::kBase64};
    objects.push_back(testing::detector_object("cup", {{BoundingBox{12, 2, 18, 8}, 0.8}}));
    objects.push_back(testing::detector_object("oven", {{BoundingBox{20, 2, 30, 12}, 0.35}}));
  }

  protocol::MockDetector detector() const {
    return protocol::MockDetector(Json{{"images", {{"img01", {{"objects", objects}}}}}});
  }
};

protocol::MockVlm rollout_script(std::vector<std::pair<std::string, Strings>> steps) {
  Json entries = Json::array();
  entries.push_back({{"image_id", "*"}, {"granularity", "sentence"}, {"responses", Strings(8, "")}});
  for (auto& [prefix, candidates] : steps) {
    entries.push_back({{"image_id", "img01#sink#2"}, {"prefix", prefix}, {"granularity", "sentence"},
                       {"responses", candidates}});
  }
  return protocol::MockVlm(Json{{"strict", true}, {"generate", entries}});
}

const std::vector<std::pair<std::string, Strings>> kTwoSteps = {
    {"", {"A cup sits there.", "A sink by the window.", "An oven and a sink.", ""}},
    {"A cup sits there.", {"The oven is on.", " A dog and a sink.", "", " Nothing else."}},
};

TEST(Verify, ThresholdIsInclusive) {
  Scenario s;
  auto det = s.detector();
  const auto hii_image = load_hii_image(s.hii.masked_image, s.access);
  const mask::DetectorContext ctx{det, dict()};
  const auto v = verify_entities({C("cup"), C("oven"), C("sink")}, hii_image, ctx, 0.35);
  EXPECT_EQ(v.verified, (std::vector<CanonicalClass>{C("cup"), C("oven")}));
  EXPECT_EQ(v.unverified, (std::vector<CanonicalClass>{C("sink")}));
  const auto strict = verify_entities({C("oven")}, hii_image, ctx, 0.3500001);
  EXPECT_EQ(strict.unverified, (std::vector<CanonicalClass>{C("oven")}));
}

TEST(Verify, CacheCallsTheDetectorOncePerClass) {
  Scenario s;
  auto det = s.detector();
  const auto hii_image = load_hii_image(s.hii.masked_image, s.access);
  VerificationCache cache(hii_image, {det, dict()}, 0.35);
  verify_entities({C("cup"), C("cup"), C("sink")}, cache);
  verify_entities({C("sink")}, cache);
  EXPECT_EQ(cache.detector_calls(), 2u);
}

TEST(BuildPairs, SharedPrefixRollout) {
  Scenario s;
  auto det = s.detector();
  auto vlm = rollout_script(kTwoSteps);
  PrefConfig cfg;
  cfg.prompts_per_hii = 1;
  cfg.seed = 42;
  const auto r = build_pairs(s.hii, vlm, {det, dict()}, dict(), cfg, s.access);
  ASSERT_EQ(r.pairs.size(), 2u);
  const auto& p0 = r.pairs[0];
  EXPECT_EQ(p0.step_index, 0);
  EXPECT_EQ(p0.prefix, "");
  EXPECT_EQ(p0.chosen_sentence, "A cup sits there.");
  // Tie on one unverified entity: the earlier candidate is rejected.
  EXPECT_EQ(p0.rejected_sentence, "A sink by the window.");
  EXPECT_EQ(p0.rejected_entities, (std::vector<CanonicalClass>{C("sink")}));
  EXPECT_EQ(p0.chosen_entities, (std::vector<CanonicalClass>{C("cup")}));
  const auto& p1 = r.pairs[1];
  EXPECT_EQ(p1.prefix, "A cup sits there.");
  EXPECT_EQ(p1.chosen_sentence, " The oven is on.");
  EXPECT_EQ(p1.rejected_sentence, " A dog and a sink.");
  EXPECT_EQ(p1.rejected_entities, (std::vector<CanonicalClass>{C("dog"), C("sink")}));
  EXPECT_EQ(p1.chosen(), "A cup sits there. The oven is on.");
  EXPECT_EQ(p1.pair_id, make_pair_id("img01#sink#2", p1.prompt_index, 1));
  EXPECT_EQ(p1.prompt, cfg.prompt_pool[static_cast<std::size_t>(p1.prompt_index)]);
  EXPECT_EQ(p1.target_model, "modelA");
  EXPECT_EQ(p1.image_path, "masked/img01__sink__2.png");
  // Third step sees only empty candidates and stops the rollout.
  ASSERT_EQ(r.steps.size(), 3u);
  EXPECT_FALSE(r.steps[2].chosen);
  for (const auto& p : r.pairs) EXPECT_NO_THROW(validate(p));
}

TEST(BuildPairs, PromptsPerHiiMultipliesRollouts) {
  Scenario s;
  auto det = s.detector();
  auto vlm = rollout_script(kTwoSteps);
  PrefConfig cfg;
  cfg.seed = 42;
  const auto r = build_pairs(s.hii, vlm, {det, dict()}, dict(), cfg, s.access);
  ASSERT_EQ(r.pairs.size(), 6u);
  std::set<int> prompts;
  for (const auto& p : r.pairs) prompts.insert(p.prompt_index);
  EXPECT_EQ(prompts.size(), 3u);
  EXPECT_TRUE(std::is_sorted(r.pairs.begin(), r.pairs.end(), [](const auto& a, const auto& b) {
    return std::tie(a.prompt_index, a.step_index) < std::tie(b.prompt_index, b.step_index);
  }));
  cfg.dedup = true;
  const auto d = build_pairs(s.hii, vlm, {det, dict()}, dict(), cfg, s.access);
  ASSERT_EQ(d.pairs.size(), 2u);
  EXPECT_EQ(d.pairs[0].prompt_index, r.pairs[0].prompt_index);
}

TEST(BuildPairs, DeterministicForAFixedSeed) {
  Scenario s;
  auto det = s.detector();
  auto vlm = rollout_script(kTwoSteps);
  PrefConfig cfg;
  cfg.seed = 7;
  const auto a = build_pairs(s.hii, vlm, {det, dict()}, dict(), cfg, s.access);
  const auto b = build_pairs(s.hii, vlm, {det, dict()}, dict(), cfg, s.access);
  EXPECT_EQ(a.pairs, b.pairs);
}

TEST(BuildPairs, AllFactualCandidatesGiveNoPairs) {
  Scenario s;
  auto det = s.detector();
  auto vlm = rollout_script({{"", {"A cup.", "An oven.", "A cup and an oven.", "Grey walls."}}});
  PrefConfig cfg;
  cfg.prompts_per_hii = 1;
  const auto r = build_pairs(s.hii, vlm, {det, dict()}, dict(), cfg, s.access);
  EXPECT_TRUE(r.pairs.empty());
  ASSERT_EQ(r.steps.size(), 2u);
  EXPECT_EQ(*r.steps[0].chosen, 0u);
  EXPECT_FALSE(r.steps[0].rejected);
}

TEST(BuildPairs, NoFactualCandidateStopsTheRollout) {
  Scenario s;
  auto det = s.detector();
  auto vlm = rollout_script({{"", {"A sink.", "A dog.", "", "A sink and a dog."}}});
  PrefConfig cfg;
  cfg.prompts_per_hii = 1;
  const auto r = build_pairs(s.hii, vlm, {det, dict()}, dict(), cfg, s.access);
  EXPECT_TRUE(r.pairs.empty());
  ASSERT_EQ(r.steps.size(), 1u);
  EXPECT_EQ(*r.steps[0].rejected, 3u);
}

TEST(BuildPairs, MaskedClassIsNeverChosenEvenIfDetected) {
  Scenario s;
  s.objects.push_back(testing::detector_object("sink", {{BoundingBox{0, 20, 5, 25}, 0.9}}));
  auto det = s.detector();
  auto vlm = rollout_script({{"", {"A sink.", "A cup.", "", ""}}});
  PrefConfig cfg;
  cfg.prompts_per_hii = 1;
  const auto r = build_pairs(s.hii, vlm, {det, dict()}, dict(), cfg, s.access);
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].chosen_sentence, "A cup.");
  EXPECT_EQ(r.pairs[0].rejected_entities, (std::vector<CanonicalClass>{C("sink")}));
}

TEST(BuildPairs, MaxSentencesBoundsEachRollout) {
  Scenario s;
  auto det = s.detector();
  protocol::MockVlm vlm(Json::parse(R"({"generate": [{"image_id": "*", "granularity": "sentence",
      "responses": ["A cup.", "A sink.", "", ""]}]})"));
  PrefConfig cfg;
  cfg.prompts_per_hii = 2;
  cfg.max_sentences = 3;
  const auto r = build_pairs(s.hii, vlm, {det, dict()}, dict(), cfg, s.access);
  EXPECT_EQ(r.steps.size(), 6u);
  ASSERT_EQ(r.pairs.size(), 6u);
  EXPECT_EQ(r.pairs[2].prefix, "A cup. A cup.");
  const Json t = trace_json(r.steps[0]);
  EXPECT_EQ(t["chosen"], 0);
  EXPECT_EQ(t["rejected"], 1);
  EXPECT_EQ(t["candidates"][2]["end_of_response"], true);
}

}  // namespace
}  // namespace hiiforge::prefs
