#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace awm {

// Runs fn(0..n-1) on up to `workers` threads. Results land at their own
// index, so downstream merges are order-deterministic regardless of worker
// count. The first worker exception is rethrown after join.
template <typename T>
std::vector<T> parallel_map(int n, int workers, const std::function<T(int)>& fn) {
  std::vector<T> results(static_cast<std::size_t>(n));
  if (n == 0) return results;
  if (workers <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) results[static_cast<std::size_t>(i)] = fn(i);
    return results;
  }

  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const int nthreads = std::min(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nthreads));
  for (int w = 0; w < nthreads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          results[static_cast<std::size_t>(i)] = fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace awm
