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
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

namespace hiiforge {

// Value or captured exception for one job.
template <class T>
struct Outcome {
  std::optional<T> value;
  std::exception_ptr error;

  bool ok() const noexcept { return !error; }
};

// Runs fn(items[i]) on up to `workers` threads. Results come back in input
// order regardless of completion order; exceptions are captured per item.
template <class T, class Fn>
auto parallel_map(const std::vector<T>& items, std::size_t workers, Fn fn)
    -> std::vector<Outcome<std::invoke_result_t<Fn&, const T&>>> {
  using R = std::invoke_result_t<Fn&, const T&>;
  std::vector<Outcome<R>> results(items.size());
  auto run_one = [&](std::size_t i) {
    try {
      results[i].value.emplace(fn(items[i]));
    } catch (...) {
      results[i].error = std::current_exception();
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, items.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < items.size(); ++i) run_one(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < items.size(); i = next++) run_one(i);
      });
    }
  }
  return results;
}

}  // namespace hiiforge
