// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include "nplmc/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace nplmc::kernels::detail {

namespace {

// Four independent Philox4x32-10 instances, one per 64-bit lane; each lane
// holds a 32-bit word in its low half.
struct Philox4Lanes {
    __m256i w0, w1, w2, w3;
};

inline Philox4Lanes philox_lanes(__m256i c0, __m256i c1, __m256i c2, __m256i c3, PhiloxKey key) {
    const __m256i m0 = _mm256_set1_epi64x(kPhiloxM0);
    const __m256i m1 = _mm256_set1_epi64x(kPhiloxM1);
    const __m256i lo_mask = _mm256_set1_epi64x(0xFFFFFFFFll);
    std::uint32_t k0 = key.k0;
    std::uint32_t k1 = key.k1;
    for (int round = 0; round < kPhiloxRounds; ++round) {
        const __m256i p0 = _mm256_mul_epu32(c0, m0);
        const __m256i p1 = _mm256_mul_epu32(c2, m1);
        const __m256i vk0 = _mm256_set1_epi64x(k0);
        const __m256i vk1 = _mm256_set1_epi64x(k1);
        const __m256i n0 = _mm256_xor_si256(_mm256_xor_si256(_mm256_srli_epi64(p1, 32), c1), vk0);
        const __m256i n1 = _mm256_and_si256(p1, lo_mask);
        const __m256i n2 = _mm256_xor_si256(_mm256_xor_si256(_mm256_srli_epi64(p0, 32), c3), vk1);
        const __m256i n3 = _mm256_and_si256(p0, lo_mask);
        c0 = n0;
        c1 = n1;
        c2 = n2;
        c3 = n3;
        k0 += kPhiloxW0;
        k1 += kPhiloxW1;
    }
    return {c0, c1, c2, c3};
}

// Same mapping as unit_from_words: 52 high bits of (hi:lo), scaled by 2^-52.
inline __m256d unit_lanes(__m256i hi, __m256i lo) {
    const __m256i bits = _mm256_or_si256(_mm256_slli_epi64(hi, 20), _mm256_srli_epi64(lo, 12));
    const __m256i magic = _mm256_set1_epi64x(0x4330000000000000ll); // 2^52
    const __m256d shifted = _mm256_castsi256_pd(_mm256_or_si256(bits, magic));
    const __m256d value = _mm256_sub_pd(shifted, _mm256_set1_pd(0x1p52));
    return _mm256_mul_pd(value, _mm256_set1_pd(0x1p-52));
}

struct LaneState {
    __m256d balance;
    __m256d paid; // all-ones where the previous month had a payment
    __m256d total;
};

inline void step(LaneState &s, __m256d u, __m256d p_miss, __m256d p_pay, double *const rows[4],
                 int t) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d p = _mm256_blendv_pd(p_miss, p_pay, s.paid);
    const __m256d pays = _mm256_and_pd(_mm256_cmp_pd(u, p, _CMP_LT_OQ),
                                       _mm256_cmp_pd(s.balance, zero, _CMP_GT_OQ));
    const __m256d x = _mm256_and_pd(pays, _mm256_min_pd(s.balance, _mm256_set1_pd(kPaymentCap)));
    s.balance = _mm256_sub_pd(s.balance, x);
    s.total = _mm256_add_pd(s.total, x);
    s.paid = pays;
    if (rows[0] != nullptr) {
        alignas(32) double lanes[4];
        _mm256_store_pd(lanes, x);
        for (int l = 0; l < 4; ++l) {
            rows[l][t] = lanes[l];
        }
    }
}

void simulate_independent(const IndependentPathJob &job) {
    const std::size_t full = job.count / 4 * 4;
    const __m256d p_miss = _mm256_set1_pd(job.p_after_miss);
    const __m256d p_pay = _mm256_set1_pd(job.p_after_pay);
    const __m256i c2 = _mm256_set1_epi64x(job.account);
    const __m256i c3 = _mm256_set1_epi64x(job.stream);
    const auto horizon = static_cast<std::size_t>(job.horizon);

    for (std::size_t k = 0; k < full; k += 4) {
        const auto first = static_cast<long long>(job.first_realisation + k);
        const __m256i c1 = _mm256_set_epi64x(static_cast<std::uint32_t>(first + 3),
                                             static_cast<std::uint32_t>(first + 2),
                                             static_cast<std::uint32_t>(first + 1),
                                             static_cast<std::uint32_t>(first));
        double *rows[4] = {nullptr, nullptr, nullptr, nullptr};
        if (job.monthly != nullptr) {
            for (std::size_t l = 0; l < 4; ++l) {
                rows[l] = job.monthly + (k + l) * horizon;
            }
        }
        LaneState s{_mm256_set1_pd(job.balance),
                    job.paid_last_month ? _mm256_castsi256_pd(_mm256_set1_epi64x(-1))
                                        : _mm256_setzero_pd(),
                    _mm256_setzero_pd()};
        int t = 0;
        while (t < job.horizon) {
            if (_mm256_movemask_pd(_mm256_cmp_pd(s.balance, _mm256_setzero_pd(), _CMP_GT_OQ)) == 0) {
                break;
            }
            const __m256i c0 = _mm256_set1_epi64x(t / 2);
            const Philox4Lanes w = philox_lanes(c0, c1, c2, c3, job.key);
            step(s, unit_lanes(w.w0, w.w1), p_miss, p_pay, rows, t);
            if (++t < job.horizon) {
                step(s, unit_lanes(w.w2, w.w3), p_miss, p_pay, rows, t);
                ++t;
            }
        }
        if (job.monthly != nullptr) {
            for (int l = 0; l < 4; ++l) {
                std::fill(rows[l] + t, rows[l] + job.horizon, 0.0);
            }
        }
        _mm256_storeu_pd(job.totals + k, s.total);
    }
    for (std::size_t k = full; k < job.count; ++k) {
        double *row = job.monthly ? job.monthly + k * horizon : nullptr;
        job.totals[k] = simulate_one(job, job.first_realisation + static_cast<std::uint32_t>(k), row);
    }
}

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double sum(const double *x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        s += x[i];
    }
    return s;
}

double sum_ratio(const double *num, const double *den, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_div_pd(_mm256_loadu_pd(num + i), _mm256_loadu_pd(den + i)));
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        s += num[i] / den[i];
    }
    return s;
}

double sum_inflated(const double *a, const double *den, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d f = _mm256_add_pd(one, _mm256_div_pd(one, _mm256_loadu_pd(den + i)));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), f));
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        s += a[i] * (1.0 + 1.0 / den[i]);
    }
    return s;
}

void central_sums(const double *x, std::size_t n, double mean, double *s2, double *s4) {
    const __m256d m = _mm256_set1_pd(mean);
    __m256d a2 = _mm256_setzero_pd();
    __m256d a4 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), m);
        const __m256d d2 = _mm256_mul_pd(d, d);
        a2 = _mm256_add_pd(a2, d2);
        a4 = _mm256_add_pd(a4, _mm256_mul_pd(d2, d2));
    }
    double b2 = hsum(a2);
    double b4 = hsum(a4);
    for (; i < n; ++i) {
        const double d = x[i] - mean;
        b2 += d * d;
        b4 += d * d * d * d;
    }
    *s2 = b2;
    *s4 = b4;
}

// exp(x) for x <= 0 (Cephes rational form); lanes below -700 return 0.
inline __m256d exp_nonpositive(__m256d x) {
    const __m256d underflow = _mm256_cmp_pd(x, _mm256_set1_pd(-700.0), _CMP_LT_OQ);
    x = _mm256_max_pd(x, _mm256_set1_pd(-700.0));
    const __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634074)),
                                       _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(6.93145751953125e-1), x);
    x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(1.42860682030941723212e-6), x);
    const __m256d xx = _mm256_mul_pd(x, x);
    __m256d px = _mm256_set1_pd(1.26177193074810590878e-4);
    px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(3.02994407707441961300e-2));
    px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(9.99999999999999999910e-1));
    px = _mm256_mul_pd(px, x);
    __m256d qx = _mm256_set1_pd(3.00198505138664455042e-6);
    qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.52448340349684104192e-3));
    qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.27265548208155028766e-1));
    qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.00000000000000000009e0));
    __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
    e = _mm256_fmadd_pd(e, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));
    const __m256i n = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(fx));
    const __m256i scale = _mm256_slli_epi64(_mm256_add_epi64(n, _mm256_set1_epi64x(1023)), 52);
    e = _mm256_mul_pd(e, _mm256_castsi256_pd(scale));
    return _mm256_andnot_pd(underflow, e);
}

void matern52_row(const double *query, const double *points, std::size_t n, std::size_t dim,
                  const double *inv_lengthscale, double tau2, double *out) {
    const __m256d sqrt5 = _mm256_set1_pd(2.23606797749978969641);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d third = _mm256_set1_pd(1.0 / 3.0);
    const __m256d scale = _mm256_set1_pd(tau2);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d r2 = _mm256_setzero_pd();
        for (std::size_t d = 0; d < dim; ++d) {
            const __m256d z = _mm256_mul_pd(
                _mm256_sub_pd(_mm256_set1_pd(query[d]), _mm256_loadu_pd(points + d * n + j)),
                _mm256_set1_pd(inv_lengthscale[d]));
            r2 = _mm256_fmadd_pd(z, z, r2);
        }
        const __m256d s = _mm256_mul_pd(sqrt5, _mm256_sqrt_pd(r2));
        const __m256d poly = _mm256_fmadd_pd(_mm256_mul_pd(s, s), third, _mm256_add_pd(one, s));
        const __m256d e = exp_nonpositive(_mm256_sub_pd(_mm256_setzero_pd(), s));
        _mm256_storeu_pd(out + j, _mm256_mul_pd(scale, _mm256_mul_pd(poly, e)));
    }
    for (; j < n; ++j) {
        double r2 = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double z = (query[d] - points[d * n + j]) * inv_lengthscale[d];
            r2 += z * z;
        }
        const double s = 2.23606797749978969641 * std::sqrt(r2);
        out[j] = tau2 * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
}

} // namespace

const KernelTable &avx2_table() {
    static const KernelTable table{"avx2",       simulate_independent, sum,          sum_ratio,
                                   sum_inflated, central_sums,         matern52_row};
    return table;
}

} // namespace nplmc::kernels::detail
