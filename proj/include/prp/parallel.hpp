#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace prp {

/// Caps the number of worker threads used by every parallel kernel.
inline void set_num_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n < 1 ? 1 : n);
#else
  (void)n;
#endif
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace prp
