#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace ridg {

// Chunked parallel loop over [0, n). The chunk -> thread mapping is fixed, so
// per-index work that writes disjoint outputs gives schedule-independent
// results. Exceptions are rethrown in the caller (lowest chunk first).
inline void parallel_for(long n, int threads,
                         const std::function<void(long)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  const int nt = static_cast<int>(std::min<long>(threads, n));
  std::vector<std::exception_ptr> errors(nt);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    const long begin = n * t / nt;
    const long end = n * (t + 1) / nt;
    pool.emplace_back([&, t, begin, end] {
      try {
        for (long i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace ridg
