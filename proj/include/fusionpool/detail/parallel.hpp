// Copyright 2026 The FusionPool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
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
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fusionpool::detail {

// Applies fn(i) for i in [0, n) on up to `jobs` threads. Results land at
// their input index, so output order never depends on scheduling. The first
// exception thrown by any task is rethrown on the calling thread.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t n, int jobs, Fn fn) {
  std::vector<Result> out(n);
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

// Block size for reductions over samples. Partial sums are formed per block
// and combined by a pairwise tree, so the rounding pattern is fixed by the
// sample count alone and not by how many threads computed the blocks.
inline constexpr std::size_t kReductionBlock = 64;

// Reduces `n` samples: block(begin, end, acc) accumulates a contiguous range
// into a zeroed accumulator of length `width`.
template <typename Block>
std::vector<double> tree_reduce(std::size_t n, std::size_t width, int jobs, Block block) {
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  if (blocks == 0) return std::vector<double>(width, 0.0);
  auto partials = parallel_map<std::vector<double>>(blocks, jobs, [&](std::size_t b) {
    std::vector<double> acc(width, 0.0);
    block(b * kReductionBlock, std::min(n, (b + 1) * kReductionBlock), acc);
    return acc;
  });
  // Fan-in 2, left to right.
  for (std::size_t stride = 1; stride < partials.size(); stride *= 2) {
    for (std::size_t i = 0; i + stride < partials.size(); i += 2 * stride) {
      auto& dst = partials[i];
      const auto& src = partials[i + stride];
      for (std::size_t k = 0; k < width; ++k) dst[k] += src[k];
    }
  }
  return std::move(partials[0]);
}

}  // namespace fusionpool::detail
