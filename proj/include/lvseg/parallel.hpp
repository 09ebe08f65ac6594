#ifndef LVSEG_PARALLEL_HPP
#define LVSEG_PARALLEL_HPP

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace lvseg {

/// Runs fn(i) for i in [0, n) across n_threads. Work item i always gets the
/// same inputs regardless of thread count; callers guarantee independence, so
/// results are deterministic. The first exception is rethrown after join.
inline void parallel_for(std::size_t n, int n_threads,
                         const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (n_threads < 1) n_threads = 1;
  const std::size_t workers = std::min<std::size_t>(n_threads, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace lvseg

#endif
