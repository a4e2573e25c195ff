#include "nplmc/allocator.hpp"

#include "nplmc/error.hpp"

#include <cmath>
#include <string>

namespace nplmc {

double PortfolioSigmas::weight() const {
    double w = std::sqrt(static_cast<double>(block_size)) * block;
    for (double s : independent) {
        w += s;
    }
    return w;
}

void AllocationInputs::validate() const {
    if (!(budget > 0.0) || !std::isfinite(budget)) {
        throw ValidationError("allocation budget must be positive and finite");
    }
    for (std::size_t j = 0; j < portfolios.size(); ++j) {
        const auto &p = portfolios[j];
        bool ok = p.block >= 0.0 && std::isfinite(p.block);
        for (double s : p.independent) {
            ok = ok && s >= 0.0 && std::isfinite(s);
        }
        if (!ok) {
            throw ValidationError("allocation inputs: negative or non-finite sigma in portfolio " +
                                  std::to_string(j));
        }
    }
}

template <class Count>
AllocationInputs to_sigmas(const VarianceInputs &variances, const Plan<Count> &shape, double budget) {
    if (variances.portfolios.size() != shape.portfolios.size()) {
        throw ValidationError("variances and plan have different portfolio counts");
    }
    AllocationInputs in;
    in.budget = budget;
    for (std::size_t j = 0; j < shape.portfolios.size(); ++j) {
        const auto &v = variances.portfolios[j];
        PortfolioSigmas s;
        s.independent.reserve(v.independent.size());
        for (double x : v.independent) {
            s.independent.push_back(std::sqrt(std::max(0.0, x)));
        }
        s.block_size = shape.portfolios[j].block_size;
        s.block = s.block_size > 0 ? std::sqrt(std::max(0.0, v.block)) : 0.0;
        in.portfolios.push_back(std::move(s));
    }
    return in;
}

template AllocationInputs to_sigmas(const VarianceInputs &, const RealPlan &, double);
template AllocationInputs to_sigmas(const VarianceInputs &, const IntegerPlan &, double);

RealPlan optimal_allocation(const AllocationInputs &inputs) {
    inputs.validate();
    double g = 0.0;
    for (const auto &p : inputs.portfolios) {
        g += p.weight();
    }
    if (!(g > 0.0)) {
        throw DegenerateError("optimal allocation: every standard deviation is zero");
    }
    const double scale = inputs.budget / g;
    RealPlan plan;
    for (const auto &p : inputs.portfolios) {
        PortfolioCounts<double> c;
        c.independent.reserve(p.independent.size());
        for (double s : p.independent) {
            c.independent.push_back(s * scale);
        }
        c.block_size = p.block_size;
        c.block = p.block_size > 0 ? p.block / std::sqrt(static_cast<double>(p.block_size)) * scale : 0.0;
        plan.portfolios.push_back(std::move(c));
    }
    return plan;
}

std::uint32_t round_count(double count) {
    if (!(count >= 0.0) || !std::isfinite(count)) {
        throw ValidationError("cannot round a negative or non-finite realisation count");
    }
    if (count < 1.0) {
        return 1;
    }
    return static_cast<std::uint32_t>(std::floor(count + 0.5));
}

IntegerPlan round_plan(const RealPlan &plan) {
    IntegerPlan out;
    for (const auto &p : plan.portfolios) {
        PortfolioCounts<std::uint32_t> c;
        c.independent.reserve(p.independent.size());
        for (double x : p.independent) {
            c.independent.push_back(round_count(x));
        }
        c.block_size = p.block_size;
        c.block = p.block_size > 0 ? round_count(p.block) : 0;
        out.portfolios.push_back(std::move(c));
    }
    return out;
}

std::vector<double> portfolio_variances(const AllocationInputs &inputs, const RealPlan &plan) {
    const auto term = [](double sigma, double count) { return sigma == 0.0 ? 0.0 : sigma * sigma / count; };
    std::vector<double> out;
    for (std::size_t j = 0; j < inputs.portfolios.size(); ++j) {
        const auto &s = inputs.portfolios[j];
        const auto &c = plan.portfolios.at(j);
        double v = 0.0;
        for (std::size_t i = 0; i < s.independent.size(); ++i) {
            v += term(s.independent[i], c.independent.at(i));
        }
        if (s.block_size > 0) {
            v += term(s.block, c.block);
        }
        out.push_back(v);
    }
    return out;
}

double rounding_bound(const RealPlan &plan) {
    const auto unit = [](double x) { return x < 1.0 ? 1.0 - x : 0.5; };
    double bound = 0.0;
    for (const auto &p : plan.portfolios) {
        for (double x : p.independent) {
            bound += unit(x);
        }
        if (p.block_size > 0) {
            bound += static_cast<double>(p.block_size) * unit(p.block);
        }
    }
    return bound;
}

double pilot_block_variance(std::span<const Account> block, const SimulationSettings &settings,
                            std::uint32_t n_pilot, std::uint64_t seed) {
    if (n_pilot < 2) {
        throw PreconditionError("pilot block variance needs at least 2 pilot realisations");
    }
    std::vector<double> totals(n_pilot);
    for (std::uint32_t k = 0; k < n_pilot; ++k) {
        totals[k] = simulate_dependent_block(block, settings.schedule, settings.horizon,
                                             {seed, Stream::pilot}, k)
                        .total;
    }
    return sample_moments(totals, false).variance;
}

VarianceInputs reference_variances(const Population &pop, const SimulationSettings &settings,
                                   std::uint32_t realisations, std::uint64_t seed, int threads) {
    if (realisations < 2) {
        throw PreconditionError("reference variances need at least 2 realisations");
    }
    const auto plan = equal_plan(pop, realisations);
    const auto out = run_plan(pop, plan, settings, {{seed, Stream::reference}, threads, MonthlyDetail::none});
    auto v = sample_variances(out);
    v.source = VarianceSource::reference;
    return v;
}

} // namespace nplmc
