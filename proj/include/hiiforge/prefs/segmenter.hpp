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

#include <string>
#include <string_view>
#include <vector>

namespace hiiforge::prefs {

inline bool is_space_byte(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// True when text[i] is a '.' that ends a lone capital letter ("A.", "J.").
inline bool is_initial_period(std::string_view text, std::size_t i) {
  if (text[i] != '.' || i == 0) return false;
  const char prev = text[i - 1];
  if (prev < 'A' || prev > 'Z') return false;
  if (i == 1) return true;
  const char before = text[i - 2];
  const bool alnum = (before >= 'a' && before <= 'z') || (before >= 'A' && before <= 'Z') ||
                     (before >= '0' && before <= '9') ||
                     static_cast<unsigned char>(before) >= 0x80;
  return !alnum;
}

// Splits after '.', '!' or '?' when followed by whitespace or end of text.
// Segments keep their leading whitespace, so concatenating them gives back
// the input byte for byte.
inline std::vector<std::string> segment_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 < text.size() && !is_space_byte(text[i + 1])) continue;
    if (is_initial_period(text, i)) continue;
    out.emplace_back(text.substr(start, i + 1 - start));
    start = i + 1;
  }
  if (start < text.size()) out.emplace_back(text.substr(start));
  return out;
}

inline bool is_blank(std::string_view s) {
  for (char c : s) {
    if (!is_space_byte(c)) return false;
  }
  return true;
}

}  // namespace hiiforge::prefs
