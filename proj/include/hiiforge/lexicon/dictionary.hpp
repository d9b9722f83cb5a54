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
#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/json_codec.hpp"
#include "hiiforge/core/jsonl.hpp"
#include "hiiforge/core/vocabulary.hpp"
#include "hiiforge/lexicon/tokenizer.hpp"

namespace hiiforge::lexicon {

inline constexpr std::size_t kMaxNgram = 4;

// Maps lowercase surface forms onto the 80 canonical classes. Every class
// name is a surface form of itself; every other form belongs to exactly one
// class. Immutable once built.
class SynonymDictionary {
 public:
  // A dictionary holding only the 80 canonical names.
  SynonymDictionary() {
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      forms_.emplace(std::string(kCocoClassNames[i]), CanonicalClass::from_index(i));
    }
  }

  // Expects {"<canonical class>": ["synonym", ...], ...}.
  static SynonymDictionary from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("dictionary", "expected a JSON object");
    SynonymDictionary dict;
    for (const auto& [name, list] : j.items()) {
      auto cls = CanonicalClass::find(name);
      if (!cls) throw ValidationError("dictionary." + name, "unknown canonical class '" + name + "'");
      if (!list.is_array())
        throw ValidationError("dictionary." + name, "expected a list of synonyms");
      for (const auto& entry : list) {
        if (!entry.is_string())
          throw ValidationError("dictionary." + name, "synonyms must be strings");
        dict.add(*cls, entry.get<std::string>());
      }
    }
    return dict;
  }

  static SynonymDictionary load(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
  }

  std::optional<CanonicalClass> lookup_exact(std::string_view normalized) const {
    auto it = forms_.find(std::string(normalized));
    if (it == forms_.end()) return std::nullopt;
    return it->second;
  }

  // Exact lookup, then the plural fallbacks on the last word:
  // "-s" dropped, "-es" dropped, "-ies" -> "-y".
  std::optional<CanonicalClass> lookup(std::string_view normalized) const {
    if (auto c = lookup_exact(normalized)) return c;
    const std::string key(normalized);
    auto ends_with = [&](std::string_view suffix) {
      return key.size() >= suffix.size() + 2 &&
             key.compare(key.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with("s")) {
      if (auto c = lookup_exact(std::string_view(key).substr(0, key.size() - 1))) return c;
    }
    if (ends_with("es")) {
      if (auto c = lookup_exact(std::string_view(key).substr(0, key.size() - 2))) return c;
    }
    if (ends_with("ies")) {
      if (auto c = lookup_exact(key.substr(0, key.size() - 3) + "y")) return c;
    }
    return std::nullopt;
  }

  // Synonyms of a class in stored order, excluding its own name.
  const std::vector<std::string>& synonyms(CanonicalClass cls) const {
    return synonyms_[cls.index()];
  }

  // Detector text prompt: the class name then its synonyms, each followed by
  // a period, e.g. "dog. puppy. beagle."
  std::string class_prompt(CanonicalClass cls) const {
    std::string out(cls.name());
    out += '.';
    for (const auto& s : synonyms_[cls.index()]) {
      out += ' ';
      out += s;
      out += '.';
    }
    return out;
  }

  // Every registered (form, class) pair, sorted by form.
  std::vector<std::pair<std::string, CanonicalClass>> surface_forms() const {
    std::vector<std::pair<std::string, CanonicalClass>> out(forms_.begin(), forms_.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  Json to_json() const {
    Json j = Json::object();
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      if (synonyms_[i].empty()) continue;
      j[std::string(kCocoClassNames[i])] = synonyms_[i];
    }
    return j;
  }

 private:
  void add(CanonicalClass cls, const std::string& raw) {
    const std::string form = normalize_phrase(raw);
    const std::string where = "dictionary." + std::string(cls.name());
    if (form.empty()) throw ValidationError(where, "empty surface form '" + raw + "'");
    if (std::count(form.begin(), form.end(), ' ') + 1 > static_cast<long>(kMaxNgram))
      throw ValidationError(where, "surface form '" + raw + "' exceeds 4 words");
    auto it = forms_.find(form);
    if (it != forms_.end()) {
      if (it->second == cls) return;
      throw ValidationError(where, "surface form '" + form + "' is claimed by both '" +
                                       std::string(it->second.name()) + "' and '" +
                                       std::string(cls.name()) + "'");
    }
    forms_.emplace(form, cls);
    synonyms_[cls.index()].push_back(form);
  }

  std::unordered_map<std::string, CanonicalClass> forms_;
  std::array<std::vector<std::string>, kNumClasses> synonyms_;
};

struct EntityMatch {
  CanonicalClass cls;
  std::size_t first_token = 0;  // [first_token, last_token)
  std::size_t last_token = 0;
  std::size_t byte_begin = 0;
  std::size_t byte_end = 0;
};

// Greedy left-to-right, longest n-gram first (n <= 4). A matched token is
// consumed and never considered again.
inline std::vector<EntityMatch> find_matches(std::string_view text, const SynonymDictionary& dict) {
  const auto tokens = tokenize(text);
  std::vector<EntityMatch> matches;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t limit = 1;
    while (limit < kMaxNgram && i + limit < tokens.size() && !tokens[i + limit].break_before) ++limit;
    bool matched = false;
    for (std::size_t n = limit; n >= 1; --n) {
      std::string key = tokens[i].text;
      for (std::size_t k = 1; k < n; ++k) {
        key += ' ';
        key += tokens[i + k].text;
      }
      if (auto cls = dict.lookup(key)) {
        matches.push_back(EntityMatch{*cls, i, i + n, tokens[i].begin, tokens[i + n - 1].end});
        i += n;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return matches;
}

// Classes mentioned in `text`, deduplicated, in order of first occurrence.
inline std::vector<CanonicalClass> extract_entities(std::string_view text,
                                                    const SynonymDictionary& dict) {
  std::vector<CanonicalClass> out;
  for (const auto& m : find_matches(text, dict)) {
    if (std::find(out.begin(), out.end(), m.cls) == out.end()) out.push_back(m.cls);
  }
  return out;
}

// Normalizes a detector's free-text label. The whole label is tried first;
// otherwise it maps only if it mentions exactly one class.
inline std::optional<CanonicalClass> normalize_label(std::string_view raw_label,
                                                     const SynonymDictionary& dict) {
  if (auto cls = dict.lookup(normalize_phrase(raw_label))) return cls;
  const auto found = extract_entities(raw_label, dict);
  if (found.size() == 1) return found.front();
  return std::nullopt;
}

// Renders a class list as text that extract_entities maps back to itself.
inline std::string render_classes(const std::vector<CanonicalClass>& classes) {
  std::string out;
  for (auto c : classes) {
    if (!out.empty()) out += ", ";
    out += c.name();
  }
  return out;
}

}  // namespace hiiforge::lexicon
