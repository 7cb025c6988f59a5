#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vpem {

// Every parallel loop in the repository must produce bitwise-identical
// results in both modes: bodies write disjoint state and all order-sensitive
// reductions run serially afterwards.
enum class Exec { serial, parallel };

template <class F>
void par_for(Exec ex, std::int64_t n, F&& f) {
#ifdef _OPENMP
  if (ex == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) f(i);
    return;
  }
#else
  (void)ex;
#endif
  for (std::int64_t i = 0; i < n; ++i) f(i);
}

inline int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace vpem
