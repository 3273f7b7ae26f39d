#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace imba_ids {

// Worker thread cap. IMBA_IDS_THREADS=0 (or unset) means hardware concurrency.
inline std::size_t worker_count() {
  std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("IMBA_IDS_THREADS")) {
    try {
      const long requested = std::stol(env);
      if (requested > 0) return static_cast<std::size_t>(requested);
    } catch (const std::exception&) {
    }
  }
  return hw;
}

// Runs fn(begin, end) over contiguous blocks of [0, n). Each block writes to
// disjoint output, so the result does not depend on the number of workers.
template <class Fn>
void parallel_for_blocks(std::size_t n, std::size_t min_block, Fn&& fn) {
  const std::size_t workers =
      std::min(worker_count(), std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_block)));
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  const std::size_t block = (n + workers - 1) / workers;
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * block;
    const std::size_t end = std::min(n, begin + block);
    if (begin >= end) break;
    threads.emplace_back([&, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace imba_ids
