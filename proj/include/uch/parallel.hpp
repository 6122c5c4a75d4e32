// Copyright 2026 The UCH Authors.
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
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace uch {

/// Runs fn(i) for i in [0, count) over contiguous blocks on worker threads.
/// Each index must write only to its own output slot; the result is then
/// independent of scheduling. The first exception thrown by any worker is
/// rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::ptrdiff_t count, Fn&& fn, unsigned max_workers = 0) {
  if (count <= 0) return;
  unsigned workers = max_workers != 0 ? max_workers
                                      : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(
      std::min<std::ptrdiff_t>(workers, (count + 63) / 64));
  if (workers <= 1) {
    for (std::ptrdiff_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::ptrdiff_t block = (count + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::ptrdiff_t begin = w * block;
      const std::ptrdiff_t end = std::min(count, begin + block);
      if (begin >= end) break;
      pool.emplace_back([&, begin, end] {
        try {
          for (std::ptrdiff_t i = begin; i < end; ++i) fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace uch
