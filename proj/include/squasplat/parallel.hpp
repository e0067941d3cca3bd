#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace squasplat {

// Worker count for `requested`; 0 means SQUASPLAT_THREADS if set, otherwise
// the hardware concurrency.
int resolve_workers(int requested);

// Runs fn(i) for every i in [0, n) on up to `workers` threads. Items are
// claimed dynamically, so fn must only write state owned by item i.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const int threads = resolve_workers(workers);
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      fn(i);
    }
  };
  const std::size_t spawn =
      std::min<std::size_t>(static_cast<std::size_t>(threads), n) - 1;
  std::vector<std::jthread> pool;
  pool.reserve(spawn);
  for (std::size_t t = 0; t < spawn; ++t) pool.emplace_back(body);
  body();
}

}  // namespace squasplat
