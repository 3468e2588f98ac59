#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ivqr {

// Worker count: hardware concurrency, capped by IVQR_THREADS when set.
inline unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("IVQR_THREADS")) {
    try {
      long cap = std::stol(env);
      if (cap >= 1) return static_cast<unsigned>(std::min<long>(cap, hw));
    } catch (...) {
    }
  }
  return hw;
}

inline thread_local bool in_parallel_region = false;

// Runs fn(i) for i in [0, count). Each index runs exactly once; results must
// be written to per-index slots so the outcome is schedule independent.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const unsigned workers = in_parallel_region ? 1u : static_cast<unsigned>(std::min<std::size_t>(worker_count(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      in_parallel_region = true;
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace ivqr
