#pragma once

// Chunked parallel execution with a deterministic contract: workers pull
// chunk indices from an atomic counter, per-chunk results land in a
// pre-sized vector, and callers reduce them in index order. Results are
// therefore bitwise independent of thread count and scheduling.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace sojourn {

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RUN_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Runs fn(chunk_index) for chunk_index in [0, n_chunks) on up to `threads`
// workers (0 = RUN_THREADS env or hardware concurrency).
template <class Fn>
void parallel_chunks(std::size_t n_chunks, unsigned threads, Fn&& fn) {
  const unsigned n_workers =
      static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), n_chunks));
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < n_chunks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < n_workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n_chunks) return;
        try {
          fn(i);
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
}

}  // namespace sojourn
