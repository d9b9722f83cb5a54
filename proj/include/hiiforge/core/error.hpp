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
#include <stdexcept>
#include <string>
#include <utility>

namespace hiiforge {

// Base of every error the toolkit throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A record or config value violates a documented invariant. `field` is a
// dotted path such as "masked_image.mask_regions[0].x_max".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// JSONL line failed to parse or validate.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, std::string field,
             const std::string& message)
      : Error(file + ":" + std::to_string(line) +
              (field.empty() ? "" : ": field '" + field + "'") + ": " +
              message),
        file_(std::move(file)),
        line_(line),
        field_(std::move(field)) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string file_;
  std::size_t line_;
  std::string field_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// The remote side answered, but not in a way the protocol allows.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// The remote side could not be reached (after retries).
class TransportError : public Error {
 public:
  using Error::Error;
};

class ImageIoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hiiforge
