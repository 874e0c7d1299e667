#ifndef SPEM_PARALLEL_HPP
#define SPEM_PARALLEL_HPP

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace spem {

/// Worker count: `requested` if positive, otherwise the hardware concurrency.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, n) split into contiguous chunks, one per worker.
/// Each index is visited exactly once, so writes to per-index slots are
/// deterministic. The first exception thrown by a worker is rethrown.
template <class Fn>
void parallel_for(long n, int threads, Fn&& fn) {
  const int workers = static_cast<int>(std::min<long>(std::max(1, threads), std::max(1L, n)));
  if (workers <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  const long chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const long begin = w * chunk;
    const long end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (long i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace spem

#endif  // SPEM_PARALLEL_HPP
