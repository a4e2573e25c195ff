#include "nplmc/instances.hpp"

#include "nplmc/philox.hpp"

#include <cmath>
#include <limits>

namespace nplmc {

ConstrainedProblem random_constrained_instance(std::uint64_t seed, std::uint32_t index,
                                               std::size_t min_portfolios, std::size_t max_portfolios) {
    CounterStream rng(seed, Stream::design, 0xC0FFEEu, index);
    std::uint32_t draw = 0;
    const auto u = [&] { return rng.uniform(draw++); };
    const auto between = [&](std::size_t lo, std::size_t hi) {
        return lo + std::min(hi - lo, static_cast<std::size_t>(u() * static_cast<double>(hi - lo + 1)));
    };

    ConstrainedProblem p;
    const std::size_t J = between(min_portfolios, max_portfolios);
    p.allocation.budget = 50.0 + 950.0 * u();
    double total_weight = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
        PortfolioSigmas s;
        const std::size_t m = between(1, 8);
        for (std::size_t i = 0; i < m; ++i) {
            s.independent.push_back(0.1 * std::exp(4.6 * u()));
        }
        if (u() < 0.5) {
            s.block_size = between(2, 10);
            s.block = 1.0 + 29.0 * u();
        }
        total_weight += s.weight();
        p.allocation.portfolios.push_back(std::move(s));
    }
    // Cap j spends a share w_j of the budget when met exactly: V_j = gamma_j^2 / (C w_j).
    // Shares above gamma_j / total make the cap bind; their sum must stay below 1.
    std::vector<double> share(J);
    double sum = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
        const bool free = u() < 0.2;
        share[j] = free ? 0.0 : p.allocation.portfolios[j].weight() / total_weight * (0.3 + 2.2 * u());
        sum += share[j];
    }
    const double target = 0.5 + 0.45 * u();
    if (sum > target) {
        for (double &w : share) {
            w *= target / sum;
        }
    }
    for (std::size_t j = 0; j < J; ++j) {
        const double g = p.allocation.portfolios[j].weight();
        p.caps.push_back(share[j] > 0.0 ? g * g / (p.allocation.budget * share[j])
                                        : std::numeric_limits<double>::infinity());
    }
    return p;
}

OracleComparison compare_with_oracle(const ConstrainedProblem &problem) {
    OracleComparison c;
    const auto sol = active_set_solve(problem);
    const auto oracle = brute_force_oracle(problem);
    c.iterations = sol.iterations;
    c.kkt = kkt_report(problem, sol);
    c.constraints_added = sol.iterations > 0;
    for (std::size_t t = 1; t < sol.alpha_trace.size(); ++t) {
        if (!(sol.alpha_trace[t] < sol.alpha_trace[t - 1])) {
            c.alpha_decreasing = false;
        }
    }
    std::size_t active = 0;
    for (bool b : sol.active) {
        active += b ? 1 : 0;
    }
    if (problem.size() > 1 && active == problem.size() - 1) {
        for (std::size_t j = 0; j < problem.size(); ++j) {
            if (!sol.active[j] && sol.variances[j] > problem.caps[j] * (1.0 + 1e-9)) {
                c.last_constraint_met = false;
            }
        }
    }
    if (oracle) {
        c.oracle_found = true;
        c.same_active = oracle->active == sol.active;
        c.objective_rel_diff = std::abs(oracle->objective - sol.objective) / oracle->objective;
    }
    return c;
}

} // namespace nplmc
