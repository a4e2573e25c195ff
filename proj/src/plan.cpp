#include "nplmc/plan.hpp"

#include "nplmc/error.hpp"

#include <string>

namespace nplmc {

IntegerPlan equal_plan(const Population &pop, std::uint32_t realisations) {
    if (realisations == 0) {
        throw ValidationError("equal_plan: realisation count must be at least 1");
    }
    IntegerPlan plan;
    for (const auto &idx : pop.portfolios) {
        PortfolioCounts<std::uint32_t> p;
        p.independent.assign(idx.independent_ids.size(), realisations);
        p.block_size = idx.dependent_ids.size();
        p.block = p.block_size > 0 ? realisations : 0;
        plan.portfolios.push_back(std::move(p));
    }
    return plan;
}

RealPlan to_real(const IntegerPlan &plan) {
    RealPlan out;
    for (const auto &p : plan.portfolios) {
        PortfolioCounts<double> q;
        q.independent.assign(p.independent.begin(), p.independent.end());
        q.block = p.block;
        q.block_size = p.block_size;
        out.portfolios.push_back(std::move(q));
    }
    return out;
}

namespace {

template <class Count> void check_shape(const Population &pop, const Plan<Count> &plan) {
    if (plan.portfolios.size() != pop.portfolios.size()) {
        throw ValidationError("plan has " + std::to_string(plan.portfolios.size()) +
                              " portfolios, population has " +
                              std::to_string(pop.portfolios.size()));
    }
    for (std::size_t j = 0; j < plan.portfolios.size(); ++j) {
        const auto &p = plan.portfolios[j];
        const auto &idx = pop.portfolios[j];
        if (p.independent.size() != idx.independent_ids.size() ||
            p.block_size != idx.dependent_ids.size()) {
            throw ValidationError("plan shape does not match portfolio " + std::to_string(j));
        }
    }
}

} // namespace

void validate_plan(const Population &pop, const IntegerPlan &plan) {
    check_shape(pop, plan);
    for (std::size_t j = 0; j < plan.portfolios.size(); ++j) {
        const auto &p = plan.portfolios[j];
        for (auto c : p.independent) {
            if (c == 0) {
                throw ValidationError("plan: zero realisations for an independent account in portfolio " +
                                      std::to_string(j));
            }
        }
        if (p.block_size > 0 && p.block == 0) {
            throw ValidationError("plan: zero realisations for dependent block of portfolio " +
                                  std::to_string(j));
        }
    }
}

void validate_plan(const Population &pop, const RealPlan &plan) {
    check_shape(pop, plan);
    for (const auto &p : plan.portfolios) {
        for (double c : p.independent) {
            if (!(c >= 0.0)) {
                throw ValidationError("plan: negative or NaN realisation count");
            }
        }
        if (!(p.block >= 0.0)) {
            throw ValidationError("plan: negative or NaN block count");
        }
    }
}

} // namespace nplmc
