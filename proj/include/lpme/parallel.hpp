#pragma once

#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace lpme {

/// Default worker count: LPME_THREADS environment variable if set,
/// otherwise the hardware concurrency (at least 1).
inline int default_thread_count() {
  if (const char* env = std::getenv("LPME_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs body(i) for i in [0, n). Work item i is pinned to worker i % threads,
/// so results written to pre-allocated slots are identical for any thread
/// count. The first captured exception is rethrown on the calling thread.
template <class F>
void parallel_for(int n, int threads, F&& body) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  if (threads > n) threads = n;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
  pool.reserve(static_cast<size_t>(threads));
  for (int k = 0; k < threads; ++k) {
    pool.emplace_back([&, k]() {
      try {
        for (int i = k; i < n; i += threads) body(i);
      } catch (...) {
        errors[static_cast<size_t>(k)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace lpme
