#pragma once

#include <cstdint>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "spotter/common.hpp"

namespace spotter::par {

// Global worker-count knob. 0 = use the OpenMP default; 1 = serial.
int max_threads();
void set_max_threads(int n);
bool openmp_enabled();

// Runs fn(i) for i in [0, n). Every iteration must write only to slots owned
// by i; under that contract the result is identical for any thread count,
// including the serial fallback.
template <class F>
void parallel_for(i64 n, F&& fn) {
#if defined(_OPENMP)
  int threads = max_threads();
  if (threads != 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(threads > 0 ? threads : omp_get_max_threads())
    for (i64 i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  for (i64 i = 0; i < n; ++i) fn(i);
}

}  // namespace spotter::par
