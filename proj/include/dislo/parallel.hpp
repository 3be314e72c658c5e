#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace dislo {

/// Runs fn(i) for i in [0, n) on up to `workers` threads with a static block split.
/// Callers write to disjoint slots; any reduction happens afterwards in index order.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    std::size_t lo = n * t / w, hi = n * (t + 1) / w;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

/// Fixed-size chunking so that reductions do not depend on the worker count.
inline constexpr std::size_t kReduceChunk = 2048;

template <class F>
double chunked_sum(std::size_t n, int workers, F&& term) {
  std::size_t nchunks = (n + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partial(nchunks, 0.0);
  parallel_for(nchunks, workers, [&](std::size_t c) {
    double s = 0.0;
    std::size_t hi = std::min(n, (c + 1) * kReduceChunk);
    for (std::size_t i = c * kReduceChunk; i < hi; ++i) s += term(i);
    partial[c] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace dislo
