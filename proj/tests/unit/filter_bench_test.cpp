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

#include "hiiforge/bench/moh_bench.hpp"
#include "hiiforge/filter/hii_filter.hpp"
#include "hiiforge/mask/mask_forge.hpp"
#include "hiiforge/protocol/mock_vlm.hpp"
#include "test_support.hpp"

namespace hiiforge {
namespace {

CanonicalClass C(std::string_view name) { return CanonicalClass::from_name(name); }

const lexicon::SynonymDictionary& dict() {
  static const auto d = lexicon::SynonymDictionary::load(testing::shipped_dictionary());
  return d;
}

// A masked image on disk plus an access object pointing at it.
struct MaskedOnDisk {
  testing::TempDir dir{"filter"};
  MaskedImage masked;
  filter::ImageAccess access;

  explicit MaskedOnDisk(const std::string& cls = "train", const std::string& parent = "img04") {
    masked.parent = parent;
    masked.masked_class = C(cls);
    masked.iterations_used = 2;
    masked.masked_image_id = make_masked_image_id(parent, masked.masked_class, 2);
    masked.mask_regions = {BoundingBox{1, 1, 5, 5}};
    masked.output_path = "masked/" + mask::masked_file_name(masked.masked_image_id);
    masked.width = 8;
    masked.height = 6;
    save_png(Image(8, 6, Rgb{9, 9, 9}), dir / masked.output_path);
    access = filter::ImageAccess{dir.path(), protocol::ImageTransport::kBase64};
  }
};

protocol::MockVlm vlm_with(const std::string& image_id, const std::vector<std::string>& responses) {
  Json entry = {{"image_id", image_id}, {"mode", "sample"}, {"responses", responses}};
  return protocol::MockVlm(Json{{"strict", true}, {"generate", Json::array({entry})}});
}

std::vector<std::string> responses_with(int hits, int total, const std::string& mention) {
  std::vector<std::string> out(static_cast<std::size_t>(hits), mention);
  out.resize(static_cast<std::size_t>(total), "Railway tracks under a grey sky.");
  return out;
}

TEST(Filter, MajorityRuleBoundary) {
  MaskedOnDisk m;
  for (int hits : {0, 4, 5, 6, 10}) {
    auto vlm = vlm_with(m.masked.masked_image_id, responses_with(hits, 10, "A train waits."));
    const auto r = filter::filter_hii(m.masked, "modelA", vlm, dict(), filter::FilterConfig{}, m.access);
    EXPECT_EQ(r.record.has_value(), hits >= 5) << hits;
    EXPECT_EQ(r.audit.hallucinating, hits);
    EXPECT_EQ(r.audit.responses.size(), 10u);
    if (r.record) {
      EXPECT_EQ(r.record->sampled_responses, 10);
      EXPECT_EQ(r.record->hallucinating_responses, hits);
      EXPECT_EQ(r.record->hii_rate, hits / 10.0);
      EXPECT_EQ(r.record->masked_image, m.masked);
      EXPECT_NO_THROW(validate(*r.record));
    }
  }
}

TEST(Filter, SynonymMentionsCount) {
  MaskedOnDisk m;
  std::vector<std::string> responses = responses_with(3, 10, "A locomotive rests.");
  responses[5] = "Two trains pass.";
  responses[6] = "The TRAIN is red.";
  auto vlm = vlm_with("*", responses);
  const auto r = filter::filter_hii(m.masked, "modelA", vlm, dict(), filter::FilterConfig{}, m.access);
  EXPECT_EQ(r.audit.hallucinating, 5);
  EXPECT_TRUE(r.record);
  EXPECT_EQ(r.audit.mentions, (std::vector<bool>{true, true, true, false, false, true, true, false, false, false}));
}

TEST(Filter, EmptyResponsesNeverCertify) {
  MaskedOnDisk m;
  auto vlm = vlm_with("*", std::vector<std::string>(10, ""));
  EXPECT_FALSE(filter::filter_hii(m.masked, "modelA", vlm, dict(), filter::FilterConfig{}, m.access).record);
}

TEST(Filter, SendsOneSampleRequestWithConfiguredSettings) {
  struct Recorder : protocol::VisionLanguageModel {
    std::vector<protocol::GenerateRequest> seen;
    protocol::GenerateResponse generate(const protocol::GenerateRequest& r) override {
      seen.push_back(r);
      return {std::vector<std::string>(static_cast<std::size_t>(r.n), "A train.")};
    }
    protocol::LogprobResponse logprob(const protocol::LogprobRequest&) override { return {}; }
  } rec;
  MaskedOnDisk m;
  filter::FilterConfig cfg;
  cfg.n_samples = 6;
  cfg.seed = 99;
  const auto r = filter::filter_hii(m.masked, "modelA", rec, dict(), cfg, m.access);
  ASSERT_EQ(rec.seen.size(), 1u);
  EXPECT_EQ(rec.seen[0].mode, protocol::DecodeMode::kSample);
  EXPECT_EQ(rec.seen[0].n, 6);
  EXPECT_EQ(rec.seen[0].seed, 99u);
  EXPECT_EQ(rec.seen[0].prompt, "Describe this image in detail.");
  EXPECT_EQ(rec.seen[0].image.image_id, m.masked.masked_image_id);
  EXPECT_EQ(r.record->sampled_responses, 6);
}

TEST(Filter, ConfigValidation) {
  filter::FilterConfig cfg;
  cfg.hii_threshold = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = filter::FilterConfig{};
  cfg.n_samples = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Filter, AuditCodecRoundTrips) {
  filter::FilterAudit a{"img04#train#2", "modelA", C("train"), {"x", "y"}, {true, false}, 1, 0.5, true};
  EXPECT_EQ(RecordCodec<filter::FilterAudit>::decode(RecordCodec<filter::FilterAudit>::encode(a)), a);
}

HiiRecord hii(const std::string& parent, const std::string& cls, const std::string& model) {
  MaskedImage m;
  m.parent = parent;
  m.masked_class = C(cls);
  m.iterations_used = 2;
  m.masked_image_id = make_masked_image_id(parent, m.masked_class, 2);
  m.mask_regions = {BoundingBox{0, 0, 1, 1}};
  m.output_path = "masked/x.png";
  m.width = m.height = 4;
  return HiiRecord{m, model, 10, 5, 0.5};
}

TEST(Intersect, KeepsIdsPresentInEverySet) {
  const std::vector<HiiRecord> a{hii("b", "sink", "A"), hii("a", "cup", "A"), hii("c", "car", "A")};
  const std::vector<HiiRecord> b{hii("c", "car", "B"), hii("a", "cup", "B")};
  const std::vector<HiiRecord> c{hii("a", "cup", "C"), hii("c", "car", "C"), hii("d", "dog", "C")};
  const auto out = filter::intersect_hii({a, b, c});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].masked_image_id, "a#cup#2");
  EXPECT_EQ(out[1].masked_image_id, "c#car#2");
  EXPECT_TRUE(filter::intersect_hii({a, {}}).empty());
  EXPECT_THROW(filter::intersect_hii({a}), ValidationError);
}

// ---------------------------------------------------------------------------
// Benchmark

TEST(Probe, LeadingWordRule) {
  using bench::ProbeAnswer;
  EXPECT_EQ(bench::parse_probe_answer("Yes, there is."), ProbeAnswer::kYes);
  EXPECT_EQ(bench::parse_probe_answer("  no."), ProbeAnswer::kNo);
  EXPECT_EQ(bench::parse_probe_answer("NO"), ProbeAnswer::kNo);
  EXPECT_EQ(bench::parse_probe_answer("\"Yes\""), ProbeAnswer::kYes);
  EXPECT_EQ(bench::parse_probe_answer("Yesterday I saw one."), ProbeAnswer::kUnparsed);
  EXPECT_EQ(bench::parse_probe_answer("I think yes."), ProbeAnswer::kUnparsed);
  EXPECT_EQ(bench::parse_probe_answer(""), ProbeAnswer::kUnparsed);
  EXPECT_EQ(bench::discriminative_prompt(C("dining table")), "Is there any visible dining table in the image?");
}

TEST(HrMetrics, WorkedExamples) {
  using bench::ProbeAnswer;
  const std::vector<ProbeAnswer> d{ProbeAnswer::kYes, ProbeAnswer::kNo, ProbeAnswer::kUnparsed, ProbeAnswer::kYes};
  EXPECT_EQ(bench::compute_hr_d(d), 0.5);
  const std::vector<bool> g{true, false, false};
  EXPECT_EQ(bench::compute_hr_g(g), 1.0 / 3.0);
  EXPECT_THROW(bench::compute_hr_d(std::vector<ProbeAnswer>{}), ValidationError);
  EXPECT_THROW(bench::compute_hr_g(std::vector<bool>{}), ValidationError);
}

TEST(HrMetrics, TalliesCombineAcrossConcatenation) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<bool> a(1 + rng.below(30)), b(1 + rng.below(30));
    for (auto&& x : a) x = rng.below(2) == 1;
    for (auto&& x : b) x = rng.below(2) == 1;
    std::vector<bool> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    auto t = bench::tally_hr_g(a);
    t += bench::tally_hr_g(b);
    ASSERT_EQ(t, bench::tally_hr_g(ab));
    ASSERT_EQ(t.rate(), bench::compute_hr_g(ab));
  }
}

bench::ItemOutcome outcome(const std::string& id, const std::string& cls, Scene scene,
                           std::optional<bench::ProbeAnswer> answer, std::vector<bool> mentions) {
  bench::ItemOutcome o;
  o.masked_image_id = id;
  o.masked_class = C(cls);
  o.scene = scene;
  if (answer) o.discriminative = bench::DiscriminativeOutcome{"...", *answer};
  o.generative = bench::GenerativeOutcome{std::vector<std::string>(mentions.size(), "..."), mentions};
  return o;
}

TEST(CoOccurrence, RanksByCountThenName) {
  const std::vector<bench::ItemOutcome> outcomes{
      outcome("1", "sink", Scene::kKitchen, std::nullopt, {true, true}),
      outcome("2", "oven", Scene::kKitchen, std::nullopt, {true, false}),
      outcome("3", "cup", Scene::kKitchen, std::nullopt, {true}),
      outcome("4", "bowl", Scene::kKitchen, std::nullopt, {false}),
      outcome("5", "sink", Scene::kKitchen, std::nullopt, {true}),
      outcome("6", "toilet", Scene::kBathroom, std::nullopt, {false}),
  };
  const auto table = bench::co_occurrence_stats(outcomes, 2);
  ASSERT_EQ(table.size(), 2u);
  EXPECT_TRUE(table.at(Scene::kBathroom).empty());
  const auto& k = table.at(Scene::kKitchen);
  ASSERT_EQ(k.size(), 2u);
  EXPECT_EQ(k[0], (bench::CoOccurrence{C("sink"), 3, 0.6}));
  // cup and oven tie at 1; names break the tie.
  EXPECT_EQ(k[1].cls, C("cup"));
  EXPECT_EQ(k[1].fraction, 0.2);
  EXPECT_EQ(bench::co_occurrence_csv(table),
            "scene,rank,class,count,fraction\nKitchen,1,sink,3,0.6\nKitchen,2,cup,1,0.2\n");
}

TEST(Report, AggregatesPerSceneAndGlobally) {
  using bench::ProbeAnswer;
  const std::vector<bench::ItemOutcome> outcomes{
      outcome("b", "sink", Scene::kKitchen, ProbeAnswer::kYes, {true}),
      outcome("a", "train", Scene::kRailroad, ProbeAnswer::kNo, {false}),
      outcome("c", "cup", Scene::kKitchen, ProbeAnswer::kUnparsed, {true}),
  };
  const auto r = bench::build_report("modelA", bench::Task::kBoth, outcomes, 5);
  EXPECT_EQ(r.n_items, 3);
  EXPECT_EQ(*r.hr_d, (bench::HrTally{1, 3}));
  EXPECT_EQ(*r.hr_g, (bench::HrTally{2, 3}));
  EXPECT_EQ(r.answers, (bench::AnswerCounts{1, 1, 1}));
  EXPECT_EQ(r.per_scene.at(Scene::kKitchen).hr_d->rate(), 0.5);
  EXPECT_EQ(r.per_scene.at(Scene::kRailroad).hr_g->rate(), 0.0);
  const Json j = bench::to_json(r);
  EXPECT_EQ(j["hr_d"], 1.0 / 3.0);
  EXPECT_EQ(j["answers"]["unparsed"], 1);
  EXPECT_TRUE(j.contains("co_occurrence"));
  EXPECT_THROW(bench::build_report("m", bench::Task::kBoth, {}, 5), ValidationError);
}

TEST(Report, TaskSelectsSections) {
  using bench::ProbeAnswer;
  const std::vector<bench::ItemOutcome> outcomes{outcome("a", "sink", Scene::kKitchen, ProbeAnswer::kYes, {true})};
  const Json d = bench::to_json(bench::build_report("m", bench::Task::kDiscriminative, outcomes));
  EXPECT_TRUE(d.contains("hr_d"));
  EXPECT_FALSE(d.contains("hr_g"));
  EXPECT_FALSE(d.contains("co_occurrence"));
  const Json g = bench::to_json(bench::build_report("m", bench::Task::kGenerative, outcomes));
  EXPECT_FALSE(g.contains("hr_d"));
  EXPECT_TRUE(g.contains("hr_g"));
  auto no_disc = outcomes;
  no_disc[0].discriminative.reset();
  EXPECT_THROW(bench::build_report("m", bench::Task::kBoth, no_disc), ValidationError);
}

TEST(Report, OrderIndependent) {
  using bench::ProbeAnswer;
  std::vector<bench::ItemOutcome> outcomes;
  SplitMix64 rng(9);
  for (int i = 0; i < 40; ++i) {
    outcomes.push_back(outcome("id" + std::to_string(i), std::string(CanonicalClass::from_index(rng.below(80)).name()),
                               static_cast<Scene>(rng.below(kNumScenes)),
                               static_cast<ProbeAnswer>(rng.below(3)), {rng.below(2) == 1, rng.below(2) == 1}));
  }
  auto reversed = outcomes;
  std::reverse(reversed.begin(), reversed.end());
  EXPECT_EQ(bench::to_json(bench::build_report("m", bench::Task::kBoth, outcomes)).dump(),
            bench::to_json(bench::build_report("m", bench::Task::kBoth, reversed)).dump());
}

TEST(Probes, RequestsAndParsing) {
  MaskedOnDisk m("sink", "img01");
  const MohItem item{m.masked, C("sink"), Scene::kKitchen};
  protocol::MockVlm vlm(Json::parse(R"({"strict": true, "generate": [
      {"image_id": "*", "prompt": "Is there any visible sink in the image?", "mode": "greedy", "responses": ["Yes."]},
      {"image_id": "*", "prompt": "Describe this image in detail.", "mode": "greedy", "responses": ["A sink and a cup."]},
      {"image_id": "*", "prompt": "Describe this image in detail.", "mode": "sample",
       "responses": ["A sink.", "A cup.", "Two sinks by the window."]}]})"));
  bench::BenchConfig cfg;
  const auto d = bench::discriminative_probe(item, vlm, m.access, cfg);
  EXPECT_EQ(d.answer, bench::ProbeAnswer::kYes);
  const auto g = bench::generative_probe(item, vlm, dict(), m.access, cfg);
  EXPECT_EQ(g.mentions, std::vector<bool>{true});
  cfg.samples = 3;
  const auto gk = bench::generative_probe(item, vlm, dict(), m.access, cfg);
  EXPECT_EQ(gk.responses.size(), 3u);
  EXPECT_EQ(gk.mentions, (std::vector<bool>{true, false, true}));
}

TEST(Outcomes, CodecRoundTripAndValidation) {
  auto o = outcome("img01#sink#2", "sink", Scene::kKitchen, bench::ProbeAnswer::kUnparsed, {true, false});
  EXPECT_EQ(RecordCodec<bench::ItemOutcome>::decode(RecordCodec<bench::ItemOutcome>::encode(o)), o);
  o.discriminative.reset();
  EXPECT_EQ(RecordCodec<bench::ItemOutcome>::decode(RecordCodec<bench::ItemOutcome>::encode(o)), o);
  Json bad = RecordCodec<bench::ItemOutcome>::encode(o);
  bad["generative"]["mentions"] = Json::array({true});
  EXPECT_THROW(RecordCodec<bench::ItemOutcome>::decode(bad), ValidationError);
}

}  // namespace
}  // namespace hiiforge
