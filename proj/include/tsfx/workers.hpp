#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace tsfx {

// Worker count: TSFX_WORKERS when set, hardware concurrency otherwise.
inline std::size_t default_workers() {
  if (const char* env = std::getenv("TSFX_WORKERS")) {
    long v = std::atol(env);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? hc : 1;
}

// Runs independent tasks on a bounded pool. Tasks must not share mutable
// state; results should be written into pre-sized slots so the output is
// identical for every worker count. The first exception is rethrown after
// all workers finish.
inline void run_parallel(std::vector<std::function<void()>>& tasks, std::size_t workers = 0) {
  if (workers == 0) workers = default_workers();
  workers = std::min(workers, tasks.size());
  if (workers <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> has_error{false};
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        try {
          tasks[i]();
        } catch (...) {
          bool expected = false;
          if (has_error.compare_exchange_strong(expected, true))
            first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (has_error.load()) std::rethrow_exception(first_error);
}

}  // namespace tsfx
