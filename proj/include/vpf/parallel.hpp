#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vpf {

/// Calls fn(begin, end) on contiguous chunks of [0, n) across `workers`
/// threads. The first exception thrown by any chunk is rethrown.
template <class Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
  const size_t w = std::max<size_t>(1, std::min<size_t>(static_cast<size_t>(std::max(workers, 1)), n));
  if (w <= 1) {
    if (n > 0) fn(size_t{0}, n);
    return;
  }
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  const size_t chunk = (n + w - 1) / w;
  for (size_t t = 0; t < w; ++t) {
    const size_t b = t * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&, b, e] {
      try {
        fn(b, e);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline int default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace vpf
