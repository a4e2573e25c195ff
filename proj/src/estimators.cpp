#include "nplmc/estimators.hpp"

#include "nplmc/error.hpp"
#include "nplmc/kernels.hpp"
#include "nplmc/normal.hpp"

#include <algorithm>
#include <string>

namespace nplmc {

namespace {

double mean_of(const std::vector<double> &x) {
    if (x.empty()) {
        throw PreconditionError("estimate_mu: unit with no realisations");
    }
    return kernels::active().sum(x.data(), x.size()) / static_cast<double>(x.size());
}

double z_for(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("coverage probability must lie in (0, 1)");
    }
    return normal_quantile(0.5 * (1.0 + p));
}

} // namespace

MuEstimate estimate_mu(const SimulationOutput &output) {
    MuEstimate est;
    est.portfolio.reserve(output.portfolios.size());
    for (const auto &po : output.portfolios) {
        double mu = 0.0;
        for (const auto &totals : po.independent_totals) {
            mu += mean_of(totals);
        }
        if (!po.block_totals.empty()) {
            mu += mean_of(po.block_totals);
        }
        est.portfolio.push_back(mu);
    }
    for (double mu : est.portfolio) {
        est.total += mu;
    }
    return est;
}

std::vector<double> estimate_monthly_mu(const SimulationOutput &output) {
    if (output.detail == MonthlyDetail::none) {
        throw PreconditionError("monthly estimates need a run with monthly detail");
    }
    std::vector<double> mu(static_cast<std::size_t>(output.horizon), 0.0);
    const auto add = [&](const MonthlyMoments &m) {
        for (std::size_t t = 0; t < mu.size(); ++t) {
            mu[t] += m.mean[t];
        }
    };
    for (const auto &po : output.portfolios) {
        for (const auto &m : po.independent_monthly) {
            add(m);
        }
        if (!po.block_totals.empty()) {
            add(po.block_monthly);
        }
    }
    return mu;
}

SampleMoments sample_moments(std::span<const double> values, bool with_kurtosis) {
    const std::size_t n = values.size();
    if (n < 2) {
        throw PreconditionError("sample variance needs at least 2 values, got " + std::to_string(n));
    }
    if (with_kurtosis && n < 4) {
        throw PreconditionError("sample kurtosis needs at least 4 values, got " + std::to_string(n));
    }
    const auto &k = kernels::active();
    SampleMoments m;
    m.n = n;
    m.mean = k.sum(values.data(), n) / static_cast<double>(n);
    double s2 = 0.0;
    double s4 = 0.0;
    // A constant sample can leave rounding residue in the central sums.
    const bool constant = std::all_of(values.begin() + 1, values.end(),
                                      [&](double v) { return v == values[0]; });
    if (constant) {
        m.mean = values[0];
    } else {
        k.central_sums(values.data(), n, m.mean, &s2, &s4);
    }
    m.variance = s2 / static_cast<double>(n - 1);
    m.degenerate = s2 == 0.0;
    if (with_kurtosis && !m.degenerate) {
        const double m2 = s2 / static_cast<double>(n);
        m.kurtosis = (s4 / static_cast<double>(n)) / (m2 * m2);
    }
    return m;
}

VarianceInputs sample_variances(const SimulationOutput &output) {
    const auto var = [](const std::vector<double> &x) {
        return x.size() < 2 ? std::numeric_limits<double>::quiet_NaN()
                            : sample_moments(x, false).variance;
    };
    VarianceInputs in;
    in.source = VarianceSource::sample;
    for (const auto &po : output.portfolios) {
        PortfolioVariances pv;
        pv.independent.reserve(po.independent_totals.size());
        for (const auto &totals : po.independent_totals) {
            pv.independent.push_back(var(totals));
        }
        pv.block = po.block_totals.empty() ? 0.0 : var(po.block_totals);
        in.portfolios.push_back(std::move(pv));
    }
    return in;
}

namespace {

template <class Count> void check_inputs(const VarianceInputs &inputs, const Plan<Count> &plan) {
    if (inputs.portfolios.size() != plan.portfolios.size()) {
        throw ValidationError("variance inputs and plan have different portfolio counts");
    }
    for (std::size_t j = 0; j < plan.portfolios.size(); ++j) {
        if (inputs.portfolios[j].independent.size() != plan.portfolios[j].independent.size()) {
            throw ValidationError("variance inputs and plan differ in portfolio " + std::to_string(j));
        }
    }
}

template <class Count>
EstimatorVariance estimator_variance_impl(const VarianceInputs &inputs, const Plan<Count> &plan) {
    check_inputs(inputs, plan);
    EstimatorVariance out;
    for (std::size_t j = 0; j < plan.portfolios.size(); ++j) {
        const auto &counts = plan.portfolios[j];
        const auto &vars = inputs.portfolios[j];
        double v = 0.0;
        for (std::size_t i = 0; i < counts.independent.size(); ++i) {
            const double c = static_cast<double>(counts.independent[i]);
            if (!(c > 0.0)) {
                throw ValidationError("estimator variance: zero realisation count in portfolio " +
                                      std::to_string(j));
            }
            v += vars.independent[i] / c;
        }
        if (counts.block_size > 0) {
            const double r = static_cast<double>(counts.block);
            if (!(r > 0.0)) {
                throw ValidationError("estimator variance: zero block count in portfolio " +
                                      std::to_string(j));
            }
            v += vars.block / r;
        }
        out.portfolio.push_back(v);
        out.total += v;
    }
    return out;
}

} // namespace

EstimatorVariance estimator_variance(const VarianceInputs &inputs, const RealPlan &plan) {
    return estimator_variance_impl(inputs, plan);
}

EstimatorVariance estimator_variance(const VarianceInputs &inputs, const IntegerPlan &plan) {
    return estimator_variance_impl(inputs, plan);
}

double prediction_error_variance(const VarianceInputs &inputs, const IntegerPlan &plan) {
    check_inputs(inputs, plan);
    const auto &k = kernels::active();
    double total = 0.0;
    std::vector<double> den;
    for (std::size_t j = 0; j < plan.portfolios.size(); ++j) {
        const auto &counts = plan.portfolios[j];
        const auto &vars = inputs.portfolios[j];
        den.assign(counts.independent.begin(), counts.independent.end());
        total += k.sum_inflated(vars.independent.data(), den.data(), den.size());
        if (counts.block_size > 0) {
            total += vars.block * (1.0 + 1.0 / static_cast<double>(counts.block));
        }
    }
    return total;
}

PredictionInterval prediction_interval(double mu_hat, const VarianceInputs &inputs,
                                       const IntegerPlan &plan, double p, const Population *pop) {
    const double z = z_for(p);
    check_inputs(inputs, plan);
    if (inputs.source == VarianceSource::sample) {
        std::vector<std::string> bad;
        for (std::size_t j = 0; j < plan.portfolios.size(); ++j) {
            const auto &counts = plan.portfolios[j];
            for (std::size_t i = 0; i < counts.independent.size(); ++i) {
                if (counts.independent[i] < 2) {
                    bad.push_back(pop ? std::to_string(pop->portfolios[j].independent_ids[i])
                                      : "portfolio " + std::to_string(j) + " position " +
                                            std::to_string(i));
                }
            }
            if (counts.block_size > 0 && counts.block < 2) {
                bad.push_back("block of portfolio " + std::to_string(j));
            }
        }
        if (!bad.empty()) {
            std::string msg = "sample-variance interval needs at least 2 realisations; " +
                              std::to_string(bad.size()) + " unit(s) have fewer:";
            for (std::size_t b = 0; b < std::min<std::size_t>(bad.size(), 20); ++b) {
                msg += " " + bad[b];
            }
            if (bad.size() > 20) {
                msg += " ...";
            }
            throw PreconditionError(msg);
        }
    }
    const double v = prediction_error_variance(inputs, plan);
    if (!(v >= 0.0)) {
        throw ValidationError("prediction error variance is negative or NaN");
    }
    return {mu_hat, z * std::sqrt(v), p};
}

std::vector<PredictionInterval> monthly_bands(const SimulationOutput &output,
                                              const IntegerPlan &plan, double p) {
    const double z = z_for(p);
    if (output.detail == MonthlyDetail::none) {
        throw PreconditionError("monthly bands need a run with monthly detail");
    }
    for (const auto &counts : plan.portfolios) {
        const bool short_indep = std::any_of(counts.independent.begin(), counts.independent.end(),
                                             [](std::uint32_t c) { return c < 2; });
        if (short_indep || (counts.block_size > 0 && counts.block < 2)) {
            throw PreconditionError(
                "the prediction band cannot be computed: some accounts have fewer than 2 realisations");
        }
    }
    const auto h = static_cast<std::size_t>(output.horizon);
    std::vector<double> center(h, 0.0);
    std::vector<double> var(h, 0.0);
    const auto add = [&](const MonthlyMoments &m) {
        const double inflate = 1.0 + 1.0 / static_cast<double>(m.count);
        for (std::size_t t = 0; t < h; ++t) {
            center[t] += m.mean[t];
            var[t] += m.variance(t) * inflate;
        }
    };
    for (const auto &po : output.portfolios) {
        for (const auto &m : po.independent_monthly) {
            add(m);
        }
        if (!po.block_totals.empty()) {
            add(po.block_monthly);
        }
    }
    std::vector<PredictionInterval> bands(h);
    for (std::size_t t = 0; t < h; ++t) {
        bands[t] = {center[t], z * std::sqrt(var[t]), p};
    }
    return bands;
}

} // namespace nplmc
