#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace aki {

// Global parallelism degree.  0 = all available cores, 1 = serial reference
// path.  Work units must be independent and write to disjoint slots so the
// result is identical for any thread count.
inline int& thread_count() {
    static int n = 0;
    return n;
}

inline int effective_threads() {
#ifdef _OPENMP
    const int n = thread_count();
    return n <= 0 ? omp_get_max_threads() : n;
#else
    return 1;
#endif
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
#ifdef _OPENMP
    const int threads = effective_threads();
    if (threads > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            fn(static_cast<std::size_t>(i));
        }
        return;
    }
#endif
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

}  // namespace aki
