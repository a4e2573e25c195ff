#pragma once

// Random constrained-allocation instances and the checks run on them by
// `oracle-check` and the acceptance suite.

#include "nplmc/constrained.hpp"

#include <cstdint>

namespace nplmc {

/// A feasible instance (Slater holds) with between `min_portfolios` and
/// `max_portfolios` portfolios. Caps are drawn so that some usually bind;
/// about one in five is left unconstrained.
ConstrainedProblem random_constrained_instance(std::uint64_t seed, std::uint32_t index,
                                               std::size_t min_portfolios, std::size_t max_portfolios);

struct OracleComparison {
    bool oracle_found = false;
    bool same_active = false;
    double objective_rel_diff = 0.0;
    KktReport kkt{};
    bool constraints_added = false;
    bool alpha_decreasing = true;  ///< strictly, across passes that added constraints
    bool last_constraint_met = true; ///< when |B| reached P - 1
    int iterations = 0;
};

OracleComparison compare_with_oracle(const ConstrainedProblem &problem);

} // namespace nplmc
