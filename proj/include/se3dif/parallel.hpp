#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace se3dif {

// Process-wide default worker count, set once by the CLI --threads flag.
inline int& default_threads() {
  static int n = 1;
  return n;
}

// Runs fn(i) for i in [0, n). Work items must be independent and write only
// to their own slots; callers do any floating-point reduction afterwards in
// index order, so results are bit-identical for every thread count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, int threads = 0) {
  if (threads <= 0) threads = default_threads();
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t chunk = 8;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t begin = next.fetch_add(chunk);
      if (begin >= n) return;
      std::size_t end = begin + chunk < n ? begin + chunk : n;
      for (std::size_t i = begin; i < end; ++i) fn(i);
    }
  };
  std::vector<std::thread> pool;
  int spawn = threads < static_cast<int>((n + chunk - 1) / chunk) ? threads
                                                                  : static_cast<int>((n + chunk - 1) / chunk);
  pool.reserve(spawn);
  for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace se3dif
