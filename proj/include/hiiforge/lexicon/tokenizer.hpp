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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace hiiforge::lexicon {

struct Token {
  std::string text;  // ASCII-lowercased
  std::size_t begin = 0;  // byte offsets into the source text
  std::size_t end = 0;
  // True when clause punctuation separates this token from the previous one.
  // Multi-word matches never span such a break.
  bool break_before = false;
};

inline bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

inline bool is_clause_punct(unsigned char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case '(': case ')': case '[': case ']': case '{': case '}':
    case '"': case '\n':
      return true;
    default:
      return false;
  }
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

// Splits on whitespace and punctuation. Word bytes are ASCII alphanumerics and
// any non-ASCII byte, so UTF-8 sequences stay inside a token.
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  bool pending_break = false;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (!is_word_byte(c)) {
      if (is_clause_punct(c)) pending_break = true;
      ++i;
      continue;
    }
    Token t;
    t.begin = i;
    while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) {
      t.text += ascii_lower(text[i]);
      ++i;
    }
    t.end = i;
    t.break_before = pending_break && !tokens.empty();
    pending_break = false;
    tokens.push_back(std::move(t));
  }
  return tokens;
}

// Canonical lookup key for a phrase: its tokens joined by single spaces.
inline std::string normalize_phrase(std::string_view phrase) {
  std::string out;
  for (const auto& t : tokenize(phrase)) {
    if (!out.empty()) out += ' ';
    out += t.text;
  }
  return out;
}

}  // namespace hiiforge::lexicon
