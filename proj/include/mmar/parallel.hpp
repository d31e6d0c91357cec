#pragma once
// Deterministic replication loop: each index writes only its own slot, so
// results are identical for any thread count (including 1).

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace mmar {

// MMAR_THREADS environment override, else hardware concurrency, else 1.
inline int default_thread_count() {
  if (const char* env = std::getenv("MMAR_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

// Runs body(0) ... body(count-1), striped across `threads` workers
// (0 = default).  The first exception thrown by any index is rethrown.
inline void parallel_for(std::size_t count,
                         const std::function<void(std::size_t)>& body,
                         int threads = 0) {
  if (threads <= 0) threads = default_thread_count();
  if (count == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace mmar
