#include "nplmc/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace nplmc::kernels {

double simulate_one(const IndependentPathJob &job, std::uint32_t realisation, double *monthly) {
    PhiloxBlock words{};
    double balance = job.balance;
    bool paid = job.paid_last_month;
    double total = 0.0;
    for (int t = 0; t < job.horizon; ++t) {
        if ((t & 1) == 0) {
            words = philox4x32({static_cast<std::uint32_t>(t / 2), realisation, job.account, job.stream},
                               job.key);
        }
        double x = 0.0;
        if (balance > 0.0) {
            const double u = (t & 1) ? unit_from_words(words[2], words[3])
                                     : unit_from_words(words[0], words[1]);
            const double p = paid ? job.p_after_pay : job.p_after_miss;
            paid = u < p;
            if (paid) {
                x = std::min(balance, kPaymentCap);
                balance -= x;
            }
        } else {
            paid = false;
        }
        total += x;
        if (monthly != nullptr) {
            monthly[t] = x;
        }
    }
    return total;
}

namespace {

void simulate_independent(const IndependentPathJob &job) {
    for (std::size_t k = 0; k < job.count; ++k) {
        double *row = job.monthly ? job.monthly + k * static_cast<std::size_t>(job.horizon) : nullptr;
        job.totals[k] = simulate_one(job, job.first_realisation + static_cast<std::uint32_t>(k), row);
    }
}

double sum(const double *x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += x[i];
    }
    return s;
}

double sum_ratio(const double *num, const double *den, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += num[i] / den[i];
    }
    return s;
}

double sum_inflated(const double *a, const double *den, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += a[i] * (1.0 + 1.0 / den[i]);
    }
    return s;
}

void central_sums(const double *x, std::size_t n, double mean, double *s2, double *s4) {
    double a = 0.0;
    double b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        const double d2 = d * d;
        a += d2;
        b += d2 * d2;
    }
    *s2 = a;
    *s4 = b;
}

void matern52_row(const double *query, const double *points, std::size_t n, std::size_t dim,
                  const double *inv_lengthscale, double tau2, double *out) {
    constexpr double sqrt5 = 2.23606797749978969641;
    for (std::size_t j = 0; j < n; ++j) {
        double r2 = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double z = (query[d] - points[d * n + j]) * inv_lengthscale[d];
            r2 += z * z;
        }
        const double s = sqrt5 * std::sqrt(r2);
        out[j] = tau2 * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
}

} // namespace

const KernelTable &scalar() {
    static const KernelTable table{"scalar",  simulate_independent, sum,        sum_ratio,
                                   sum_inflated, central_sums,      matern52_row};
    return table;
}

} // namespace nplmc::kernels
