#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace qrgmm {

// Run body(i) for i in [begin, end) on up to `threads` std::threads, in
// contiguous chunks. body must be safe to call concurrently for distinct i.
// If any call throws, the exception from the lowest-indexed failing chunk is
// rethrown after all workers join, so the result is all-or-error and the
// reported error does not depend on scheduling.
template <typename F>
void parallel_for(int begin, int end, int threads, F&& body) {
  const int count = end - begin;
  if (count <= 0) return;
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }

  std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    const int lo = begin + static_cast<int>(
                               static_cast<long long>(count) * w / threads);
    const int hi = begin + static_cast<int>(
                               static_cast<long long>(count) * (w + 1) / threads);
    workers.emplace_back([&, lo, hi, w] {
      try {
        for (int i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace qrgmm
