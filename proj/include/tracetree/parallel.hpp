#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace tracetree {

inline std::size_t effective_jobs(std::size_t jobs) {
  if (jobs == 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
  }
  return jobs;
}

/// Applies `fn(index)` to every index in [0, count) using up to `jobs`
/// threads. Results land in an index-addressed vector, so the output is
/// independent of scheduling. The first exception thrown by any task is
/// rethrown on the calling thread.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t count, std::size_t jobs, Fn&& fn) {
  std::vector<Result> results(count);
  if (count == 0) return results;
  jobs = std::min(effective_jobs(jobs), count);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) results[i] = fn(i);
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        results[i] = fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(jobs);
  for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
  if (failed.load() && error) std::rethrow_exception(error);
  return results;
}

}  // namespace tracetree
