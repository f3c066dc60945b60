#pragma once

#include <exception>
#include <vector>

namespace cpmmd {

/// Runs fn(i) for i in [0, count) on the OpenMP team. The first exception in
/// index order is rethrown after the loop.
template <class Fn>
void parallel_for_index(int count, Fn&& fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count > 0 ? count : 0));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    try {
      fn(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Sets the OpenMP team size; values < 1 keep the runtime default.
void set_thread_count(int threads);
int max_threads();

}  // namespace cpmmd
