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

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/json_codec.hpp"

namespace hiiforge::pipeline {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// One JSON object per event to an optional log file; short human lines to
// an optional stream (normally stderr). Thread-safe.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(std::ostream* human) : human_(human) {}

  void open(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    file_.open(path, std::ios::app);
    if (!file_) throw ConfigError("cannot open log file " + path.string());
  }

  void set_human(std::ostream* human) { human_ = human; }

  void event(std::string_view level, std::string_view name, Json fields = Json::object()) {
    Json line;
    line["ts"] = utc_timestamp();
    line["level"] = std::string(level);
    line["event"] = std::string(name);
    for (auto& [k, v] : fields.items()) line[k] = v;
    const std::lock_guard lock(mutex_);
    if (file_.is_open()) file_ << line.dump() << '\n' << std::flush;
    if (human_ && level != "debug") {
      *human_ << "[" << level << "] " << name;
      if (fields.contains("message")) *human_ << ": " << fields["message"].get<std::string>();
      *human_ << '\n';
    }
  }

  void info(std::string_view name, Json fields = Json::object()) { event("info", name, std::move(fields)); }
  void warn(std::string_view name, Json fields = Json::object()) { event("warn", name, std::move(fields)); }
  void error(std::string_view name, Json fields = Json::object()) { event("error", name, std::move(fields)); }
  void debug(std::string_view name, Json fields = Json::object()) { event("debug", name, std::move(fields)); }

  void summary(std::string_view text) {
    const std::lock_guard lock(mutex_);
    if (human_) *human_ << text << '\n';
  }

 private:
  std::mutex mutex_;
  std::ofstream file_;
  std::ostream* human_ = nullptr;
};

}  // namespace hiiforge::pipeline
