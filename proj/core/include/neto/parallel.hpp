#pragma once

#include <algorithm>
#include <thread>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace neto {

/// Global cap on worker threads used by the toolkit. 0 means "hardware".
inline int& thread_cap() {
  static int cap = 0;
  return cap;
}

inline void set_thread_cap(int n) { thread_cap() = n; }

inline int worker_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  const int cap = thread_cap();
  return cap > 0 ? std::min(cap, hw) : hw;
}

/// Runs f(first, last) over a static partition of [0, n) into contiguous
/// chunks, one per worker. The partition depends only on (n, workers), so
/// any per-worker accumulation merged in worker order is reproducible for a
/// fixed thread configuration.
template <class F>
void parallel_chunks(int n, F&& f) {
  const int workers = std::min(worker_count(), std::max(n, 1));
  if (workers <= 1 || n <= 1) {
    if (n > 0) f(0, 0, n);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel num_threads(workers)
  {
    const int w = omp_get_thread_num();
    const int lo = static_cast<int>(static_cast<long long>(n) * w / workers);
    const int hi =
        static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    if (lo < hi) f(w, lo, hi);
  }
#else
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int lo = static_cast<int>(static_cast<long long>(n) * w / workers);
    const int hi =
        static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    if (lo < hi) pool.emplace_back([&, w, lo, hi] { f(w, lo, hi); });
  }
  for (auto& t : pool) t.join();
#endif
}

}  // namespace neto
