#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace mtht {

namespace detail {
inline thread_local bool in_parallel_worker = false;
}

/// Worker cap for parallel_for. MTHT_THREADS is re-read on every call so a
/// process can switch between serial and parallel phases.
inline int thread_count() {
  if (const char* env = std::getenv("MTHT_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

/// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
/// worker. Chunks are disjoint, so callers writing to per-index slots need no
/// locking, and results must not depend on the schedule. Nested calls run
/// serially inside a worker.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
  if (n <= 0) return;
  const std::int64_t workers =
      detail::in_parallel_worker ? 1 : std::min<std::int64_t>(thread_count(), n);
  if (workers <= 1) {
    fn(std::int64_t(0), n);
    return;
  }
  const std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers));
  for (std::int64_t w = 0; w < workers; ++w) {
    const std::int64_t begin = w * chunk;
    const std::int64_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      detail::in_parallel_worker = true;
      fn(begin, end);
      detail::in_parallel_worker = false;
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace mtht
