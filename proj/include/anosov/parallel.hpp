#pragma once
// Chunked job runner shared by the verification suites.  Results must be
// written into per-index slots so reports stay byte-identical regardless of
// the thread count.

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace anosov {

inline void run_chunked(int jobs, const std::function<void(int)>& body) {
  int nthreads = (int)std::min(8u, std::thread::hardware_concurrency());
  nthreads = std::max(1, nthreads);
  if (nthreads == 1 || jobs < 2 * nthreads) {
    for (int i = 0; i < jobs; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  int per = (jobs + nthreads - 1) / nthreads;
  for (int t = 0; t < nthreads; ++t) {
    int a = t * per, b = std::min(jobs, a + per);
    if (a < b)
      pool.emplace_back([&body, a, b] {
        for (int i = a; i < b; ++i) body(i);
      });
  }
  for (auto& th : pool) th.join();
}

}  // namespace anosov
