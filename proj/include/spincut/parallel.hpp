#ifndef SPINCUT_PARALLEL_HPP
#define SPINCUT_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace spincut {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Callers write
/// into slot i so reductions afterwards happen in index order. If several
/// tasks throw, the exception of the lowest index is rethrown.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  const auto width = static_cast<std::size_t>(std::max(1, workers));
  if (width == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::size_t error_index = count;
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(width, count); ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
}

/// out[i] = fn(i), computed with parallel_for.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, int workers, Fn&& fn) {
  std::vector<T> out(count);
  parallel_for(count, workers, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace spincut

#endif  // SPINCUT_PARALLEL_HPP
