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

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "hiiforge/bench/moh_bench.hpp"
#include "hiiforge/core/error.hpp"
#include "hiiforge/core/json_codec.hpp"
#include "hiiforge/core/jsonl.hpp"
#include "hiiforge/filter/hii_filter.hpp"
#include "hiiforge/lexicon/dictionary.hpp"
#include "hiiforge/mask/mask_forge.hpp"
#include "hiiforge/prefs/pref_builder.hpp"
#include "hiiforge/protocol/http.hpp"
#include "hiiforge/protocol/mock_detector.hpp"
#include "hiiforge/protocol/mock_vlm.hpp"

namespace hiiforge::pipeline {

struct HttpSettings {
  int timeout_ms = 60000;
  int max_retries = 3;
  int backoff_initial_ms = 200;
  int backoff_max_ms = 5000;
  int max_in_flight = 4;
  std::optional<std::string> bearer_token;
};

// One run's configuration. Relative paths inside records and in this config
// (dictionary, mock fixtures, log file) resolve against dataset_root.
struct PipelineConfig {
  std::filesystem::path dataset_root = ".";
  std::optional<std::string> dictionary;
  std::string detector_url;
  std::map<std::string, std::string> vlm_urls;
  protocol::ImageTransport image_transport = protocol::ImageTransport::kBase64;
  HttpSettings http;
  int parallelism = 1;
  std::uint64_t seed = 0;
  std::optional<std::string> log_file;
  mask::MaskConfig mask;
  filter::FilterConfig filter;
  prefs::PrefConfig prefs;
  bench::BenchConfig bench;

  std::filesystem::path resolve(const std::string& relative) const {
    return dataset_root / relative;
  }

  void validate() const {
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (http.max_in_flight < 1) throw ConfigError("http.max_in_flight must be >= 1");
    if (http.max_retries < 0) throw ConfigError("http.max_retries must be >= 0");
    try {
      mask.validate();
      filter.validate();
      prefs.validate();
      bench.validate();
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline void reject_unknown(const Json& j, std::initializer_list<std::string_view> known,
                           std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool found = false;
    for (auto k : known) found = found || k == key;
    if (!found) throw ConfigError("unknown config key '" + std::string(where) + key + "'");
  }
}

inline Rgb parse_rgb(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + " must be [r, g, b]");
  Rgb c;
  std::uint8_t* channels[3] = {&c.r, &c.g, &c.b};
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number_integer() || j[i].get<int>() < 0 || j[i].get<int>() > 255)
      throw ConfigError(where + " channels must be integers in [0, 255]");
    *channels[i] = static_cast<std::uint8_t>(j[i].get<int>());
  }
  return c;
}

template <class T>
void read(const Json& j, std::string_view key, T& out) {
  if (j.contains(key)) out = j.at(std::string(key)).get<T>();
}

}  // namespace detail

inline protocol::ImageTransport parse_transport(std::string_view s) {
  if (s == "path") return protocol::ImageTransport::kPath;
  if (s == "base64") return protocol::ImageTransport::kBase64;
  throw ConfigError("image_transport must be 'path' or 'base64', got '" + std::string(s) + "'");
}

// Builds a config from its JSON document; `base_dir` anchors a relative
// dataset_root (normally the config file's directory).
inline PipelineConfig config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  using detail::read;
  using detail::reject_unknown;
  PipelineConfig c;
  try {
    reject_unknown(j,
                   {"dataset_root", "dictionary", "detector_url", "vlm_urls", "image_transport",
                    "http", "parallelism", "seed", "log_file", "mask", "filter", "prefs", "bench"},
                   "");
    std::string root = ".";
    read(j, "dataset_root", root);
    c.dataset_root = (base_dir / root).lexically_normal();
    if (c.dataset_root.filename().empty() && c.dataset_root.has_parent_path())
      c.dataset_root = c.dataset_root.parent_path();
    if (j.contains("dictionary")) c.dictionary = j.at("dictionary").get<std::string>();
    read(j, "detector_url", c.detector_url);
    if (j.contains("vlm_urls")) {
      for (const auto& [name, url] : j.at("vlm_urls").items()) c.vlm_urls[name] = url.get<std::string>();
    }
    if (j.contains("image_transport")) c.image_transport = parse_transport(j.at("image_transport").get<std::string>());
    read(j, "parallelism", c.parallelism);
    read(j, "seed", c.seed);
    if (j.contains("log_file")) c.log_file = j.at("log_file").get<std::string>();
    c.filter.seed = c.prefs.seed = c.bench.seed = c.seed;

    if (j.contains("http")) {
      const Json& h = j.at("http");
      reject_unknown(h, {"timeout_ms", "max_retries", "backoff_initial_ms", "backoff_max_ms", "max_in_flight"},
                     "http.");
      read(h, "timeout_ms", c.http.timeout_ms);
      read(h, "max_retries", c.http.max_retries);
      read(h, "backoff_initial_ms", c.http.backoff_initial_ms);
      read(h, "backoff_max_ms", c.http.backoff_max_ms);
      read(h, "max_in_flight", c.http.max_in_flight);
    }
    if (j.contains("mask")) {
      const Json& m = j.at("mask");
      reject_unknown(m, {"detect_threshold", "max_iterations", "dilation_fraction", "fill", "output_dir"},
                     "mask.");
      read(m, "detect_threshold", c.mask.detect_threshold);
      read(m, "max_iterations", c.mask.max_iterations);
      read(m, "dilation_fraction", c.mask.dilation_fraction);
      if (m.contains("fill")) c.mask.fill = detail::parse_rgb(m.at("fill"), "mask.fill");
      read(m, "output_dir", c.mask.output_dir);
    }
    if (j.contains("filter")) {
      const Json& f = j.at("filter");
      reject_unknown(f, {"n_samples", "hii_threshold", "ddg_prompt", "temperature", "top_p", "max_tokens", "seed"},
                     "filter.");
      read(f, "n_samples", c.filter.n_samples);
      read(f, "hii_threshold", c.filter.hii_threshold);
      read(f, "ddg_prompt", c.filter.ddg_prompt);
      read(f, "temperature", c.filter.temperature);
      read(f, "top_p", c.filter.top_p);
      read(f, "max_tokens", c.filter.max_tokens);
      read(f, "seed", c.filter.seed);
    }
    if (j.contains("prefs")) {
      const Json& p = j.at("prefs");
      reject_unknown(p,
                     {"prompt_pool", "prompts_per_hii", "candidates_per_step", "max_sentences",
                      "verify_threshold", "temperature", "top_p", "max_tokens", "seed", "dedup"},
                     "prefs.");
      read(p, "prompt_pool", c.prefs.prompt_pool);
      read(p, "prompts_per_hii", c.prefs.prompts_per_hii);
      read(p, "candidates_per_step", c.prefs.candidates_per_step);
      read(p, "max_sentences", c.prefs.max_sentences);
      read(p, "verify_threshold", c.prefs.verify_threshold);
      read(p, "temperature", c.prefs.temperature);
      read(p, "top_p", c.prefs.top_p);
      read(p, "max_tokens", c.prefs.max_tokens);
      read(p, "seed", c.prefs.seed);
      read(p, "dedup", c.prefs.dedup);
    }
    if (j.contains("bench")) {
      const Json& b = j.at("bench");
      reject_unknown(b, {"ddg_prompt", "samples", "temperature", "top_p", "max_tokens", "seed", "top_k"},
                     "bench.");
      read(b, "ddg_prompt", c.bench.ddg_prompt);
      read(b, "samples", c.bench.samples);
      read(b, "temperature", c.bench.temperature);
      read(b, "top_p", c.bench.top_p);
      read(b, "max_tokens", c.bench.max_tokens);
      read(b, "seed", c.bench.seed);
      read(b, "top_k", c.bench.top_k);
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config has a wrongly typed value: ") + e.what());
  }
  c.validate();
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j, path.parent_path());
}

// "modelA" -> "HIIFORGE_VLM_URL_MODELA"; non-alphanumerics become '_'.
inline std::string vlm_env_name(std::string_view model) {
  std::string out = "HIIFORGE_VLM_URL_";
  for (char c : model) {
    out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : '_';
  }
  return out;
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

// Environment variables override service URLs from the file. Model names
// not in the file can be added this way as well, given --model.
inline void apply_env(PipelineConfig& c, const EnvLookup& env,
                      const std::set<std::string>& extra_models = {}) {
  if (auto v = env("HIIFORGE_DETECTOR_URL")) c.detector_url = *v;
  std::set<std::string> models = extra_models;
  for (const auto& [name, url] : c.vlm_urls) models.insert(name);
  for (const auto& name : models) {
    if (auto v = env(vlm_env_name(name))) c.vlm_urls[name] = *v;
  }
  if (auto v = env("HIIFORGE_BEARER_TOKEN")) c.http.bearer_token = *v;
}

inline lexicon::SynonymDictionary load_dictionary(const PipelineConfig& c) {
  if (!c.dictionary) return lexicon::SynonymDictionary{};
  try {
    return lexicon::SynonymDictionary::load(c.resolve(*c.dictionary));
  } catch (const Error& e) {
    throw ConfigError(std::string("dictionary: ") + e.what());
  }
}

inline protocol::HttpClientConfig http_client_config(const PipelineConfig& c, const std::string& url) {
  protocol::HttpClientConfig h;
  h.base_url = url;
  h.timeout_ms = c.http.timeout_ms;
  h.max_retries = c.http.max_retries;
  h.backoff_initial_ms = c.http.backoff_initial_ms;
  h.backoff_max_ms = c.http.backoff_max_ms;
  h.max_in_flight = c.http.max_in_flight;
  h.bearer_token = c.http.bearer_token;
  return h;
}

inline constexpr std::string_view kMockScheme = "mock://";

inline bool is_mock_url(std::string_view url) { return url.starts_with(kMockScheme); }

// "mock://fixture.json" loads a scripted backend; http(s) URLs go remote.
inline std::unique_ptr<protocol::Detector> make_detector(const PipelineConfig& c) {
  if (c.detector_url.empty()) throw ConfigError("no detector_url configured");
  if (is_mock_url(c.detector_url)) {
    try {
      return std::make_unique<protocol::MockDetector>(
          protocol::MockDetector::load(c.resolve(c.detector_url.substr(kMockScheme.size()))));
    } catch (const Error& e) {
      throw ConfigError(std::string("detector fixture: ") + e.what());
    }
  }
  return std::make_unique<protocol::HttpDetector>(http_client_config(c, c.detector_url));
}

inline std::unique_ptr<protocol::VisionLanguageModel> make_vlm(const PipelineConfig& c,
                                                               const std::string& model) {
  const auto it = c.vlm_urls.find(model);
  if (it == c.vlm_urls.end() || it->second.empty())
    throw ConfigError("no URL configured for model '" + model + "' (set vlm_urls." + model +
                      " or " + vlm_env_name(model) + ")");
  if (is_mock_url(it->second)) {
    try {
      return std::make_unique<protocol::MockVlm>(
          protocol::MockVlm::load(c.resolve(it->second.substr(kMockScheme.size()))));
    } catch (const Error& e) {
      throw ConfigError("fixture for model '" + model + "': " + e.what());
    }
  }
  return std::make_unique<protocol::HttpVlm>(http_client_config(c, it->second));
}

}  // namespace hiiforge::pipeline
