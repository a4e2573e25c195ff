#pragma once

#include "nplmc/estimators.hpp"
#include "nplmc/plan.hpp"
#include "nplmc/simulator.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nplmc {

/// Standard deviations of one portfolio's units.
struct PortfolioSigmas {
    std::vector<double> independent; ///< sigma_i, plan order
    double block = 0.0;              ///< sigma_D of the block total
    std::size_t block_size = 0;      ///< |D|

    /// sqrt(|D|) sigma_D + sum_i sigma_i
    [[nodiscard]] double weight() const;
};

struct AllocationInputs {
    std::vector<PortfolioSigmas> portfolios;
    double budget = 0.0;

    void validate() const;
};

/// Square roots of a set of variances, paired with block sizes from `plan`.
template <class Count>
AllocationInputs to_sigmas(const VarianceInputs &variances, const Plan<Count> &shape, double budget);

/// Budget-constrained minimiser of Var(mu_hat): R_i = sigma_i C / G and
/// r_j = sigma_D,j / sqrt(|D_j|) C / G with G the sum of portfolio weights.
/// Throws DegenerateError when every sigma is zero.
RealPlan optimal_allocation(const AllocationInputs &inputs);

/// Rounding used for every plan: 0 and values in (0, 1) go to 1, otherwise
/// the nearest integer with halves rounded up.
std::uint32_t round_count(double count);

IntegerPlan round_plan(const RealPlan &plan);

/// Var(mu_hat_j) per portfolio for a real plan; zero-sigma units add nothing,
/// so plans with zero counts for them are fine.
std::vector<double> portfolio_variances(const AllocationInputs &inputs, const RealPlan &plan);

/// Largest possible |cost(round_plan(plan)) - cost(plan)|.
double rounding_bound(const RealPlan &plan);

/// Sample variance of `n_pilot` joint realisations of one dependent block,
/// drawn from the pilot stream so they never enter mu_hat.
double pilot_block_variance(std::span<const Account> block, const SimulationSettings &settings,
                            std::uint32_t n_pilot, std::uint64_t seed);

/// Sample variances from an equal plan of `realisations` runs on the
/// reference stream; used as the "true" sigma in experiments.
VarianceInputs reference_variances(const Population &pop, const SimulationSettings &settings,
                                   std::uint32_t realisations, std::uint64_t seed, int threads);

} // namespace nplmc
