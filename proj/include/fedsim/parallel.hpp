#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fedsim {

// Serial is the reference implementation; OpenMP must produce bit-identical
// results because every work item is independent and all reductions happen
// in a fixed order after the parallel region.
enum class ExecMode { serial, parallel };

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

template <typename Fn>
void parallel_for(std::size_t n, ExecMode mode, Fn&& fn) {
#ifdef _OPENMP
    if (mode == ExecMode::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            fn(static_cast<std::size_t>(i));
        }
        return;
    }
#else
    (void)mode;
#endif
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

} // namespace fedsim
