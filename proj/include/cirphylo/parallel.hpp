#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace cirphylo {

// Worker count used when a caller passes 0: $CIRPHYLO_THREADS if set, else the
// hardware concurrency.
inline unsigned default_workers() {
  if (const char* env = std::getenv("CIRPHYLO_THREADS"); env != nullptr && *env != '\0') {
    try {
      auto n = std::stol(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs f(i) for i in [0, n) on `workers` threads (0 = default_workers()).
// Tasks are dealt out in contiguous blocks; f must only touch state owned by task i.
// The first exception thrown by any task is rethrown on the calling thread.
template <typename F>
void parallel_for(std::size_t n, unsigned workers, F&& f) {
  if (workers == 0) workers = default_workers();
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    auto begin = n * w / workers;
    auto end = n * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (auto i = begin; i < end; ++i) f(i);
      } catch (...) {
        std::lock_guard lock{error_mutex};
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace cirphylo
