#pragma once

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace genmm {

/// Resolves a requested thread count; zero or negative means "all available".
inline int resolve_threads(int requested) {
#if defined(_OPENMP)
    return requested > 0 ? requested : omp_get_max_threads();
#else
    (void)requested;
    return 1;
#endif
}

/// Static partition of [begin, end). Each index is handled by exactly one
/// thread, so any per-index result is independent of the thread count.
template <class Fn>
void parallel_for(int begin, int end, int threads, Fn&& fn) {
#if defined(_OPENMP)
    const int n = resolve_threads(threads);
    if (n > 1 && end - begin > 1) {
#pragma omp parallel for schedule(static) num_threads(n)
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }
#else
    (void)threads;
#endif
    for (int i = begin; i < end; ++i) fn(i);
}

}  // namespace genmm
