// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace spac {

// Runs fn(i) for i in [0, n) on up to `threads` workers.  Work items must be
// independent and write only to their own outputs; results are then
// identical for every thread count.
template <typename Fn>
void
parallel_for(std::size_t n, int threads, Fn&& fn)
{
  const std::size_t workers = std::min<std::size_t>(n, std::size_t(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load())
          return;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true))
            error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool)
    t.join();
  if (error)
    std::rethrow_exception(error);
}

inline int
default_thread_count()
{
  return int(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace spac
