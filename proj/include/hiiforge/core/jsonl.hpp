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
#include <filesystem>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/json_codec.hpp"
#include "hiiforge/core/records.hpp"

namespace hiiforge {

// A decoded record plus the 1-based line it came from.
template <class T>
struct Lined {
  std::size_t line = 0;
  T record;
};

namespace jsonl_detail {

template <class T>
concept Validatable = requires(const T& r) { validate(r); };

template <class T>
void check(const T& record) {
  if constexpr (Validatable<T>) validate(record);
}

}  // namespace jsonl_detail

// Parses one JSON object per line. Blank lines are skipped. Fails fast on the
// first malformed or invalid line.
template <class T>
std::vector<Lined<T>> read_jsonl(std::istream& in, const std::string& source = "<stream>") {
  std::vector<Lined<T>> out;
  std::set<std::string> seen_ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ParseError(source, line, "", std::string("invalid JSON: ") + e.what());
    }
    try {
      T record = RecordCodec<T>::decode(j);
      jsonl_detail::check(record);
      if constexpr (std::is_same_v<T, ImageRecord>) {
        if (!seen_ids.insert(record.image_id).second)
          throw ValidationError("image_id", "duplicate id '" + record.image_id + "'");
      }
      out.push_back(Lined<T>{line, std::move(record)});
    } catch (const ValidationError& e) {
      throw ParseError(source, line, e.field(), e.what());
    }
  }
  return out;
}

template <class T>
std::vector<Lined<T>> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_jsonl<T>(in, path.string());
}

template <class T>
std::vector<T> read_records(const std::filesystem::path& path) {
  std::vector<T> out;
  for (auto& l : read_jsonl<T>(path)) out.push_back(std::move(l.record));
  return out;
}

// Renders records as JSONL text. Every record is validated before any text
// is produced.
template <class T>
std::string to_jsonl(const std::vector<T>& records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      jsonl_detail::check(records[i]);
    } catch (const ValidationError& e) {
      throw ValidationError(e.field(), std::string("record ") + std::to_string(i) +
                                           " refused: " + e.what());
    }
  }
  std::string out;
  for (const auto& r : records) {
    out += RecordCodec<T>::encode(r).dump();
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& records) {
  write_text_file(path, to_jsonl(records));
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline Json read_json_file(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string(), 0, "", std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace hiiforge
