#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nplmc {

/// 0 means "all logical cores".
inline int resolve_threads(int requested) noexcept {
    if (requested > 0) {
        return requested;
    }
#ifdef _OPENMP
    return omp_get_num_procs();
#else
    return 1;
#endif
}

/// Runs body(i) for i in [0, n). Every iteration writes to its own slot, so
/// the result is the same for any thread count. The exception from the
/// lowest failing index is rethrown.
template <class Body> void parallel_for(std::size_t n, int threads, Body &&body) {
    std::exception_ptr failure;
    std::size_t failed_at = n;
    std::mutex guard;
    const auto run = [&](std::size_t i) {
        try {
            body(i);
        } catch (...) {
            std::lock_guard lock(guard);
            if (i < failed_at) {
                failed_at = i;
                failure = std::current_exception();
            }
        }
    };
    const int workers = resolve_threads(threads);
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n && !failure; ++i) {
            run(i);
        }
    } else {
#ifdef _OPENMP
        const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
        for (long long i = 0; i < count; ++i) {
            run(static_cast<std::size_t>(i));
        }
#else
        for (std::size_t i = 0; i < n; ++i) {
            run(i);
        }
#endif
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace nplmc
