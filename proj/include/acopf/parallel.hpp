#pragma once

#include <algorithm>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace acopf {

// Runs f(i) for i in [0, n). threads <= 1 takes the serial reference path.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
#ifdef _OPENMP
  if (threads > 1) {
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
    for (long long i = 0; i < count; ++i) f(static_cast<std::size_t>(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) f(i);
}

// max over f(i), f(i) >= 0. Max is order independent so the result does not
// depend on the thread count.
template <class F>
double parallel_max(std::size_t n, int threads, F&& f) {
  double m = 0.0;
#ifdef _OPENMP
  if (threads > 1) {
    const auto count = static_cast<long long>(n);
#pragma omp parallel for reduction(max : m) num_threads(threads)
    for (long long i = 0; i < count; ++i) m = std::max(m, f(static_cast<std::size_t>(i)));
    return m;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, f(i));
  return m;
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace acopf
