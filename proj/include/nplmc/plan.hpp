#pragma once

#include "nplmc/population.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace nplmc {

/// Realisation counts of one portfolio. Independent counts follow the order
/// of PortfolioIndex::independent_ids; every member of the dependent block
/// shares `block`, which makes the per-block equality hold by construction.
template <class Count> struct PortfolioCounts {
    std::vector<Count> independent;
    Count block{};
    std::size_t block_size = 0;

    friend bool operator==(const PortfolioCounts &, const PortfolioCounts &) = default;
};

template <class Count> struct Plan {
    std::vector<PortfolioCounts<Count>> portfolios;

    /// Total number of account-realisations, sum_i R_i.
    [[nodiscard]] double cost() const noexcept {
        double total = 0.0;
        for (const auto &p : portfolios) {
            total += static_cast<double>(p.block) * static_cast<double>(p.block_size);
            for (auto c : p.independent) {
                total += static_cast<double>(c);
            }
        }
        return total;
    }

    friend bool operator==(const Plan &, const Plan &) = default;
};

using RealPlan = Plan<double>;
using IntegerPlan = Plan<std::uint32_t>;

/// R realisations for every account.
IntegerPlan equal_plan(const Population &pop, std::uint32_t realisations);

RealPlan to_real(const IntegerPlan &plan);

/// Throws ValidationError if the plan does not match the population's
/// portfolio structure or an integer count is zero.
void validate_plan(const Population &pop, const IntegerPlan &plan);
void validate_plan(const Population &pop, const RealPlan &plan);

/// Count of every account, indexed by account id.
template <class Count>
std::vector<Count> counts_by_account(const Population &pop, const Plan<Count> &plan) {
    std::vector<Count> out(pop.size());
    for (std::size_t j = 0; j < pop.portfolios.size(); ++j) {
        const auto &idx = pop.portfolios[j];
        const auto &counts = plan.portfolios.at(j);
        for (std::size_t k = 0; k < idx.independent_ids.size(); ++k) {
            out[idx.independent_ids[k]] = counts.independent.at(k);
        }
        for (auto id : idx.dependent_ids) {
            out[id] = counts.block;
        }
    }
    return out;
}

} // namespace nplmc
