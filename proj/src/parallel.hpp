#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ntkinfo::detail {

// Runs body(i) for i in [0, n) on up to hardware_concurrency threads. The first
// exception thrown by any body is rethrown after all workers finish.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// Pairwise (tree) sum of items[0..n) in index order.
template <class T>
T pairwise_sum(const std::vector<T>& items, std::size_t begin, std::size_t end) {
  if (end - begin == 1) return items[begin];
  const std::size_t mid = begin + (end - begin) / 2;
  return pairwise_sum(items, begin, mid) + pairwise_sum(items, mid, end);
}

}  // namespace ntkinfo::detail
