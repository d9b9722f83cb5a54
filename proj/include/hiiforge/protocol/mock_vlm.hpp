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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/hashing.hpp"
#include "hiiforge/core/json_codec.hpp"
#include "hiiforge/core/jsonl.hpp"
#include "hiiforge/protocol/backend.hpp"

namespace hiiforge::protocol {

// Hash identifying a (prompt, continuation prefix) pair in VLM fixtures.
inline std::string prompt_hash(std::string_view prompt, std::string_view prefix = "") {
  return sha256_hex(key_of({prompt, prefix}));
}

// Scripted VLM. Generate entries map request features to a list of
// responses; logprob entries map (image_id, prompt, completion) to a value.
//
//   {
//     "strict": true,
//     "generate": [
//       {"image_id": "img01#sink#*",          // exact, "prefix*", or "*"
//        "prompt": "Describe this image in detail.", "prefix": "",
//        // or "prompt_hash": "<hex>"; "prefix" alone matches any prompt;
//        // neither = any prompt and prefix
//        "mode": "sample",                    // optional: greedy | sample
//        "granularity": "sentence",           // optional: response | sentence
//        "seed": 42,                          // optional; absent = any seed
//        "responses": ["...", "..."]}
//     ],
//     "logprob": [{"image_id": "...", "prompt": "...", "completion": "...",
//                  "logprob": -12.5}],
//     "fallback": [""]                        // non-strict generate answer
//   }
//
// The most specific matching entry wins (image pattern first, then prompt,
// prefix, granularity, mode and seed; earlier entries win ties). A request
// for n responses returns the first n scripted ones. In non-strict mode
// unmatched generate requests get the fallback list cycled to length n, and
// unmatched logprob requests get -0.5 per completion byte.
class MockVlm final : public VisionLanguageModel {
 public:
  explicit MockVlm(const Json& fixture) {
    if (field::has(fixture, "strict")) strict_ = field::boolean(fixture, "strict");
    if (field::has(fixture, "fallback")) fallback_ = field::strings(fixture, "fallback");
    if (field::has(fixture, "generate")) {
      const Json& arr = field::array(fixture, "generate");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string path = "generate[" + std::to_string(i) + "].";
        GenerateEntry e;
        e.image_pattern = field::string(arr[i], "image_id", path);
        if (field::has(arr[i], "prompt_hash")) {
          e.prompt_hash = field::string(arr[i], "prompt_hash", path);
        } else if (field::has(arr[i], "prompt")) {
          const std::string prefix =
              field::has(arr[i], "prefix") ? field::string(arr[i], "prefix", path) : "";
          e.prompt_hash = prompt_hash(field::string(arr[i], "prompt", path), prefix);
        } else if (field::has(arr[i], "prefix")) {
          e.prefix = field::string(arr[i], "prefix", path);
        }
        if (field::has(arr[i], "mode")) {
          const std::string mode = field::string(arr[i], "mode", path);
          if (mode != "greedy" && mode != "sample")
            throw ValidationError(path + "mode", "expected greedy or sample");
          e.mode = mode == "greedy" ? DecodeMode::kGreedy : DecodeMode::kSample;
        }
        if (field::has(arr[i], "granularity")) {
          const std::string g = field::string(arr[i], "granularity", path);
          if (g != "response" && g != "sentence")
            throw ValidationError(path + "granularity", "expected response or sentence");
          e.granularity = g == "sentence" ? Granularity::kSentence : Granularity::kResponse;
        }
        if (field::has(arr[i], "seed")) e.seed = arr[i]["seed"].get<std::uint64_t>();
        e.responses = field::strings(arr[i], "responses", path);
        generate_.push_back(std::move(e));
      }
    }
    if (field::has(fixture, "logprob")) {
      const Json& arr = field::array(fixture, "logprob");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string path = "logprob[" + std::to_string(i) + "].";
        LogprobEntry e;
        e.image_pattern = field::string(arr[i], "image_id", path);
        e.prompt = field::string(arr[i], "prompt", path);
        e.completion = field::string(arr[i], "completion", path);
        e.logprob = field::number(arr[i], "logprob", path);
        logprob_.push_back(std::move(e));
      }
    }
  }

  static MockVlm load(const std::filesystem::path& path) { return MockVlm(read_json_file(path)); }

  GenerateResponse generate(const GenerateRequest& request) override {
    validate(request);
    const std::string hash = prompt_hash(request.prompt, request.prefix);
    const GenerateEntry* best = nullptr;
    long long best_score = -1;
    for (const auto& e : generate_) {
      const int image_score = match_image(e.image_pattern, request.image.image_id);
      if (image_score < 0) continue;
      if (e.prompt_hash && *e.prompt_hash != hash) continue;
      if (e.prefix && *e.prefix != request.prefix) continue;
      if (e.granularity && *e.granularity != request.granularity) continue;
      if (e.mode && *e.mode != request.mode) continue;
      if (e.seed && *e.seed != request.seed) continue;
      const long long score = image_score * 32LL + (e.prompt_hash ? 16 : 0) + (e.prefix ? 8 : 0) +
                              (e.granularity ? 4 : 0) + (e.mode ? 2 : 0) + (e.seed ? 1 : 0);
      if (score > best_score) {
        best = &e;
        best_score = score;
      }
    }
    const auto n = static_cast<std::size_t>(request.n);
    GenerateResponse out;
    if (!best) {
      if (strict_) {
        throw ProtocolError("mock VLM has no script for image '" + request.image.image_id +
                            "', prompt_hash " + hash);
      }
      const auto& pool = fallback_.empty() ? kEmpty : fallback_;
      for (std::size_t i = 0; i < n; ++i) out.responses.push_back(pool[i % pool.size()]);
      return out;
    }
    if (best->responses.size() < n) {
      if (strict_) {
        throw ProtocolError("mock VLM script for '" + request.image.image_id + "' has " +
                            std::to_string(best->responses.size()) + " responses, " +
                            std::to_string(n) + " requested");
      }
      for (std::size_t i = 0; i < n; ++i)
        out.responses.push_back(best->responses[i % best->responses.size()]);
      return out;
    }
    out.responses.assign(best->responses.begin(),
                         best->responses.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
  }

  LogprobResponse logprob(const LogprobRequest& request) override {
    validate(request);
    const LogprobEntry* best = nullptr;
    int best_score = -1;
    for (const auto& e : logprob_) {
      const int score = match_image(e.image_pattern, request.image.image_id);
      if (score < 0 || e.prompt != request.prompt || e.completion != request.completion) continue;
      if (score > best_score) {
        best = &e;
        best_score = score;
      }
    }
    if (best) return LogprobResponse{best->logprob};
    if (strict_) {
      throw ProtocolError("mock VLM has no logprob for image '" + request.image.image_id +
                          "' and the given prompt/completion");
    }
    return LogprobResponse{-0.5 * static_cast<double>(request.completion.size())};
  }

 private:
  struct GenerateEntry {
    std::string image_pattern;
    std::optional<std::string> prompt_hash;
    std::optional<std::string> prefix;
    std::optional<Granularity> granularity;
    std::optional<DecodeMode> mode;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> responses;
  };
  struct LogprobEntry {
    std::string image_pattern;
    std::string prompt;
    std::string completion;
    double logprob = 0.0;
  };

  // -1 no match, 0 "*", 1 + prefix length for "prefix*", large for exact.
  static int match_image(const std::string& pattern, const std::string& id) {
    if (pattern == id) return 1 << 20;
    if (pattern == "*") return 0;
    if (!pattern.empty() && pattern.back() == '*') {
      const auto stem = std::string_view(pattern).substr(0, pattern.size() - 1);
      if (std::string_view(id).substr(0, stem.size()) == stem)
        return 1 + static_cast<int>(stem.size());
    }
    return -1;
  }

  inline static const std::vector<std::string> kEmpty{""};

  bool strict_ = true;
  std::vector<std::string> fallback_;
  std::vector<GenerateEntry> generate_;
  std::vector<LogprobEntry> logprob_;
};

}  // namespace hiiforge::protocol
