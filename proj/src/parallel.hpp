#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace metaid {

// Runs fn(begin, end) on contiguous chunks across `threads` workers.
// threads <= 1 runs inline on the calling thread.
inline void parallel_for(uint64_t count, unsigned threads,
                         const std::function<void(uint64_t, uint64_t)>& fn) {
  if (count == 0) return;
  if (threads <= 1 || count == 1) {
    fn(0, count);
    return;
  }
  if (threads > count) threads = static_cast<unsigned>(count);
  uint64_t chunk = count / threads;
  uint64_t rem = count % threads;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  uint64_t start = 0;
  for (unsigned t = 0; t < threads; ++t) {
    uint64_t len = chunk + (t < rem ? 1 : 0);
    uint64_t begin = start;
    uint64_t end = start + len;
    start = end;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace metaid
