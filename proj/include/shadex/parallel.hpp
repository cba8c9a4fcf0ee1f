#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace shadex {

/// Worker bound from SHADEX_THREADS, else the hardware concurrency.
inline int worker_count() {
  if (const char* env = std::getenv("SHADEX_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) over contiguous chunks. Each index must write
/// only its own outputs, so results do not depend on the worker count.
template <typename Fn>
void parallel_for(int n, Fn&& fn, int min_chunk = 16) {
  const int workers = std::min(worker_count(), std::max(1, n / std::max(1, min_chunk)));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long long>(n) * w / workers);
    const int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    pool.emplace_back([begin, end, &fn] {
      for (int i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace shadex
