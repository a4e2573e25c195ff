#include "nplmc/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace nplmc;

namespace {

std::vector<const kernels::KernelTable *> variants() {
    std::vector<const kernels::KernelTable *> v{&kernels::scalar()};
    if (kernels::avx2() != nullptr) {
        v.push_back(kernels::avx2());
    }
    return v;
}

std::vector<double> randoms(std::size_t n, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> x(n);
    for (auto &v : x) {
        v = d(gen);
    }
    return x;
}

} // namespace

TEST(Kernels, ActiveIsKnown) {
    const auto &a = kernels::active();
    EXPECT_TRUE(&a == &kernels::scalar() || &a == kernels::avx2());
}

TEST(Kernels, PathsBitwiseEqualAcrossVariants) {
    for (const auto *k : variants()) {
        for (std::uint32_t acc = 0; acc < 25; ++acc) {
            kernels::IndependentPathJob job;
            job.balance = acc == 0 ? 0.0 : 500.0 + 380.0 * acc;
            job.p_after_miss = 0.02 + 0.035 * acc;
            job.p_after_pay = std::min(0.999, job.p_after_miss + 0.3);
            job.paid_last_month = acc % 2;
            job.horizon = acc == 3 ? 17 : 84;
            job.key = PhiloxKey::from_seed(0x1234 + acc);
            job.stream = 2;
            job.account = acc;
            job.first_realisation = 3;
            job.count = 1 + acc * 3; // odd and even batch lengths
            std::vector<double> totals(job.count);
            std::vector<double> monthly(job.count * job.horizon);
            job.totals = totals.data();
            job.monthly = monthly.data();
            k->simulate_independent(job);
            std::vector<double> row(job.horizon);
            for (std::size_t r = 0; r < job.count; ++r) {
                const double t = kernels::simulate_one(job, job.first_realisation + r, row.data());
                ASSERT_EQ(totals[r], t) << k->name;
                for (int m = 0; m < job.horizon; ++m) {
                    ASSERT_EQ(monthly[r * job.horizon + m], row[m]) << k->name;
                }
            }
            std::vector<double> only(job.count);
            job.totals = only.data();
            job.monthly = nullptr;
            k->simulate_independent(job);
            EXPECT_EQ(only, totals);
        }
    }
}

TEST(Kernels, ReductionsAgreeToRounding) {
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 64u, 1001u}) {
        const auto x = randoms(n, n + 1, -50.0, 4000.0);
        const auto d = randoms(n, n + 2, 1.0, 300.0);
        double s = 0, sr = 0, si = 0, c2 = 0, c4 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            s += x[i];
            sr += x[i] / d[i];
            si += x[i] * (1.0 + 1.0 / d[i]);
        }
        const double mean = n ? s / static_cast<double>(n) : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            c2 += (x[i] - mean) * (x[i] - mean);
            c4 += std::pow(x[i] - mean, 4);
        }
        for (const auto *k : variants()) {
            const double tol = 1e-12 * (1.0 + std::abs(s));
            EXPECT_NEAR(k->sum(x.data(), n), s, tol) << k->name;
            EXPECT_NEAR(k->sum_ratio(x.data(), d.data(), n), sr, 1e-12 * (1.0 + std::abs(sr))) << k->name;
            EXPECT_NEAR(k->sum_inflated(x.data(), d.data(), n), si, 1e-12 * (1.0 + std::abs(si))) << k->name;
            double a2 = 0, a4 = 0;
            k->central_sums(x.data(), n, mean, &a2, &a4);
            EXPECT_NEAR(a2, c2, 1e-12 * (1.0 + c2)) << k->name;
            EXPECT_NEAR(a4, c4, 1e-12 * (1.0 + c4)) << k->name;
        }
    }
}

TEST(Kernels, MaternRowAgreesAcrossVariants) {
    const std::size_t dim = 3;
    for (std::size_t n : {1u, 5u, 8u, 203u}) {
        const auto pts = randoms(n * dim, n, 0.0, 1.0);
        const auto q = randoms(dim, n + 9, 0.0, 1.0);
        const std::vector<double> inv{1.0 / 0.2, 1.0 / 0.7, 1.0 / 3.0};
        std::vector<double> ref(n);
        for (std::size_t j = 0; j < n; ++j) {
            double r2 = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double z = (q[d] - pts[d * n + j]) * inv[d];
                r2 += z * z;
            }
            const double r = std::sqrt(5.0 * r2);
            ref[j] = 1.7 * (1.0 + r + r * r / 3.0) * std::exp(-r);
        }
        for (const auto *k : variants()) {
            std::vector<double> out(n);
            k->matern52_row(q.data(), pts.data(), n, dim, inv.data(), 1.7, out.data());
            for (std::size_t j = 0; j < n; ++j) {
                EXPECT_NEAR(out[j], ref[j], 1e-13) << k->name;
            }
        }
    }
}
