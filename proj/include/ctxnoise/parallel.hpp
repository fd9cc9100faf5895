// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ctxnoise {

/// Runs fn(i) for i in [0, n) on at most `cap` threads. Results must be
/// written by index so output order never depends on scheduling. The first
/// exception stops further work and is rethrown on the caller's thread.
template <typename Fn>
void parallel_for(size_t n, size_t cap, Fn&& fn) {
  if (n == 0) return;
  const size_t workers = std::max<size_t>(1, std::min(cap, n));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (!stop.load()) {
          const size_t i = next.fetch_add(1);
          if (i >= n) return;
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
            stop = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace ctxnoise
