#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace uclm {

// Execution policy for the data-parallel kernels. Every parallel kernel is a
// pure element-wise map (no cross-thread reductions), so serial and parallel
// runs produce bit-identical results; the serial path is kept as the
// reference implementation for tests and benchmarks.
enum class Exec { serial, parallel };

Exec& default_exec_ref();

inline Exec default_exec() { return default_exec_ref(); }
inline void set_default_exec(Exec e) { default_exec_ref() = e; }

inline void set_num_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
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

} // namespace uclm
