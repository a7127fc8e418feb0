#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace wtl::detail {

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(task) for task in [0, n_tasks) on up to `workers` threads. Tasks are
/// claimed dynamically; callers write results into per-task slots.
template <typename Fn>
void parallel_for(std::size_t n_tasks, unsigned workers, Fn&& fn) {
  const unsigned n = std::min<std::size_t>(resolve_workers(workers), std::max<std::size_t>(n_tasks, 1));
  if (n <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) fn(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1)) fn(t);
  };
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < n; ++w) pool.emplace_back(work);
}

}  // namespace wtl::detail
