#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference version and,
// on x86-64, an AVX2 version; the active table is picked once at startup
// from CPUID and can be forced with NPLMC_SIMD=scalar|avx2.
//
// The path simulation kernel is bitwise identical across variants. The
// floating-point reductions agree to rounding (summation order differs).

#include "nplmc/philox.hpp"

#include <cstddef>
#include <cstdint>

namespace nplmc::kernels {

inline constexpr double kPaymentCap = 50.0;

/// Simulates `count` realisations (first_realisation, first_realisation+1, ...)
/// of one account whose segment never changes.
struct IndependentPathJob {
    double balance = 0.0;
    double p_after_miss = 0.0; ///< payment probability when the previous month had no payment
    double p_after_pay = 0.0;  ///< ... when it had one
    bool paid_last_month = false;
    int horizon = 84;
    PhiloxKey key{};
    std::uint32_t stream = 0;
    std::uint32_t account = 0;
    std::uint32_t first_realisation = 0;
    std::size_t count = 0;
    double *totals = nullptr;  ///< [count]
    double *monthly = nullptr; ///< optional, [count * horizon] row-major
};

struct KernelTable {
    const char *name;
    void (*simulate_independent)(const IndependentPathJob &job);
    double (*sum)(const double *x, std::size_t n);
    /// sum_i num[i] / den[i]
    double (*sum_ratio)(const double *num, const double *den, std::size_t n);
    /// sum_i a[i] * (1 + 1 / den[i])
    double (*sum_inflated)(const double *a, const double *den, std::size_t n);
    /// Central power sums sum (x-mean)^2 and sum (x-mean)^4.
    void (*central_sums)(const double *x, std::size_t n, double mean, double *s2, double *s4);
    /// out[j] = tau2 * matern52(r_j), r_j the scaled distance between `query`
    /// and point j of `points` (dimension-major: points[d * n + j]).
    void (*matern52_row)(const double *query, const double *points, std::size_t n,
                         std::size_t dim, const double *inv_lengthscale, double tau2,
                         double *out);
};

const KernelTable &scalar();

/// nullptr when the CPU or the build lacks AVX2/FMA.
const KernelTable *avx2();

/// Table used by the library.
const KernelTable &active();

/// Scalar reference for one month-by-month path; used by the scalar table
/// and by the tests as the ground truth for the SIMD variants.
double simulate_one(const IndependentPathJob &job, std::uint32_t realisation, double *monthly);

} // namespace nplmc::kernels
