#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace adepinn {

/// Execution policy for batched loss/metric evaluation. threads == 1 gives a
/// sequential, fixed-order reduction (the deterministic mode); threads > 1
/// splits the index range into static per-thread chunks that the caller
/// reduces in thread order, so results are reproducible for a fixed thread
/// count.
struct ExecPolicy {
  int threads = 1;

  static ExecPolicy sequential() { return ExecPolicy{1}; }
  static ExecPolicy hardware() {
    unsigned n = std::thread::hardware_concurrency();
    return ExecPolicy{n > 0 ? static_cast<int>(n) : 1};
  }
};

/// Runs body(thread_index, begin, end) on static contiguous chunks of
/// [0, n). Chunk boundaries depend only on (n, threads).
inline void parallel_chunks(std::size_t n, const ExecPolicy& exec,
                            const std::function<void(int, std::size_t, std::size_t)>& body) {
  const int nt = exec.threads < 1 ? 1 : exec.threads;
  if (nt == 1 || n < 2) {
    body(0, 0, n);
    return;
  }
  const std::size_t chunk = (n + nt - 1) / nt;
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    const std::size_t b = std::min(n, t * chunk);
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&body, t, b, e] { body(t, b, e); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace adepinn
