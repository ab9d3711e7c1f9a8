#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace maxdep {

namespace detail {
inline thread_local bool inside_parallel_region = false;
}

/// Number of workers for parallel loops: MAXDEP_THREADS if set and
/// positive, otherwise the hardware concurrency.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("MAXDEP_THREADS")) {
    try {
      const long requested = std::stol(env);
      if (requested > 0) return static_cast<std::size_t>(requested);
    } catch (...) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count). Work is split into contiguous blocks;
/// results must be written to preallocated slots indexed by i so the
/// outcome does not depend on the number of workers. Nested calls run
/// serially. The exception from the lowest failing block is rethrown.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::min(worker_count(), count);
  if (workers <= 1 || detail::inside_parallel_region) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const std::size_t block = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      detail::inside_parallel_region = true;
      const std::size_t begin = w * block;
      const std::size_t end = std::min(count, begin + block);
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace maxdep
