#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace nritv {

namespace detail {
inline std::atomic<unsigned>& thread_count_slot() {
  static std::atomic<unsigned> t{1};
  return t;
}
}  // namespace detail

/// 0 selects hardware concurrency.
inline void set_threads(unsigned t) {
  if (t == 0) t = std::max(1u, std::thread::hardware_concurrency());
  detail::thread_count_slot().store(t);
}

inline unsigned threads() { return detail::thread_count_slot().load(); }

/// Runs f(begin, end) over a contiguous partition of [0, count).
/// Each range must write disjoint outputs; results are then independent
/// of the thread count (no cross-range reductions happen here).
template <class F>
void parallel_for(size_t count, F&& f) {
  unsigned t = threads();
  if (count == 0) return;
  if (t <= 1 || count == 1) {
    f(size_t{0}, count);
    return;
  }
  t = static_cast<unsigned>(std::min<size_t>(t, count));
  size_t chunk = (count + t - 1) / t;
  std::vector<std::thread> pool;
  pool.reserve(t - 1);
  for (unsigned w = 1; w < t; ++w) {
    size_t b = w * chunk;
    size_t e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&f, b, e] { f(b, e); });
  }
  f(size_t{0}, std::min(count, chunk));
  for (auto& th : pool) th.join();
}

}  // namespace nritv
