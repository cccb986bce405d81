#pragma once

// Deterministic parallel map: item i is always computed by fn(i) and stored
// at position i, so results do not depend on the number of workers. The
// first exception (by item index) is rethrown on the calling thread.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <type_traits>
#include <vector>

namespace nluq {

// 0 means "all hardware threads".
inline std::atomic<int>& default_threads_slot() {
  static std::atomic<int> slot{0};
  return slot;
}

inline void set_default_threads(int n) { default_threads_slot().store(std::max(0, n)); }

inline int resolve_threads(int requested) {
  int n = requested > 0 ? requested : default_threads_slot().load();
  if (n <= 0) {
    n = static_cast<int>(std::thread::hardware_concurrency());
  }
  return std::max(1, n);
}

template <typename Fn>
auto parallel_map(std::size_t count, Fn&& fn, int threads = 0)
    -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
  using T = std::invoke_result_t<Fn&, std::size_t>;
  std::vector<T> out(count);
  const auto workers = static_cast<std::size_t>(resolve_threads(threads));
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) {
      out[i] = fn(i);
    }
    return out;
  }

  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  constexpr std::size_t kChunk = 16;
  auto work = [&] {
    for (;;) {
      const std::size_t begin = next.fetch_add(kChunk);
      if (begin >= count) {
        return;
      }
      const std::size_t end = std::min(count, begin + kChunk);
      for (std::size_t i = begin; i < end; ++i) {
        try {
          out[i] = fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n_threads = std::min(workers, (count + kChunk - 1) / kChunk);
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back(work);
  }
  for (auto& th : pool) {
    th.join();
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  return out;
}

}  // namespace nluq
