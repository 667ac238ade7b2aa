#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace amort {

// Runtime switch between the OpenMP kernels and the serial reference path.
// Both paths produce bitwise-identical results: parallel loops only ever
// write disjoint slots and reductions are performed in index order
// afterwards, so the switch exists for testing and benchmarking, not
// correctness.
bool parallel_enabled();
void set_parallel_enabled(bool on);
int worker_count();

template <class F>
void serial_for(std::size_t n, F&& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

template <class F>
void parallel_for(std::size_t n, F&& body) {
#ifdef _OPENMP
  if (parallel_enabled() && n > 1) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      body(static_cast<std::size_t>(i));
    return;
  }
#endif
  serial_for(n, body);
}

}  // namespace amort
