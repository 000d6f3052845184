#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pminv {

/// Worker count for `requested` (0 means one per hardware thread).
inline int worker_count(int requested, int tasks) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  return std::clamp(n, 1, std::max(tasks, 1));
}

/// Calls fn(i) for every i in [0, n).  Tasks are claimed in index order; results
/// must be written to per-index slots so the outcome does not depend on
/// scheduling.  The first exception thrown by a task is rethrown after all
/// workers join.
template <class F>
void parallel_for(int n, int threads, F&& fn) {
  const int workers = worker_count(threads, n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace pminv
