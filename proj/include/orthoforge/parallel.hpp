#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace orthoforge {

// workers <= 0 means use the OpenMP default. Serial builds run everything
// on the calling thread whatever the request.
inline int resolve_workers(int workers) {
#ifdef _OPENMP
  if (workers > 0) return workers;
  return omp_get_max_threads();
#else
  (void)workers;
  return 1;
#endif
}

}  // namespace orthoforge
