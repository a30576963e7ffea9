#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace prnu {

inline int hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// Run fn(i) for i in [0, n) on up to `threads` workers. Work is split into
/// contiguous static chunks, so any result written to slot i is identical to
/// the serial execution; fn must only touch its own slot. The first exception
/// thrown by a worker is rethrown on the caller.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t want = static_cast<std::size_t>(threads <= 0 ? hardware_threads() : threads);
  const int nt = static_cast<int>(std::max<std::size_t>(1, std::min(want, n)));
  if (nt == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int t = 0; t < nt; ++t) {
    const std::size_t begin = n * t / nt;
    const std::size_t end = n * (t + 1) / nt;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace prnu
