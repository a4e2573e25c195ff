#include "nplmc/constrained.hpp"

#include "nplmc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nplmc {

namespace {

constexpr double kViolationTol = 1e-12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

double ConstrainedProblem::gamma(std::size_t j) const {
    return allocation.portfolios.at(j).weight();
}

double ConstrainedProblem::epsilon(std::size_t j) const {
    return gamma(j) / caps.at(j);
}

void ConstrainedProblem::validate() const {
    allocation.validate();
    if (caps.size() != allocation.portfolios.size()) {
        throw ValidationError("constrained problem: " + std::to_string(caps.size()) + " caps for " +
                              std::to_string(allocation.portfolios.size()) + " portfolios");
    }
    for (std::size_t j = 0; j < caps.size(); ++j) {
        if (!(caps[j] > 0.0)) {
            throw ValidationError("constrained problem: cap of portfolio " + std::to_string(j) +
                                  " must be positive");
        }
        if (!(gamma(j) > 0.0)) {
            throw DegenerateError("constrained problem: portfolio " + std::to_string(j) +
                                  " has zero variance weight");
        }
    }
}

std::vector<double> portfolio_variances(const ConstrainedProblem &problem, const RealPlan &plan) {
    return portfolio_variances(problem.allocation, plan);
}

StationaryPoint stationarity_solution(const ConstrainedProblem &problem,
                                      const std::vector<bool> &active) {
    problem.validate();
    const std::size_t J = problem.size();
    if (active.size() != J) {
        throw ValidationError("active set has the wrong length");
    }
    StationaryPoint sp;
    sp.remaining = problem.allocation.budget;
    bool all_active = true;
    for (std::size_t j = 0; j < J; ++j) {
        if (active[j]) {
            sp.remaining -= problem.epsilon(j) * problem.gamma(j);
        } else {
            sp.unconstrained_weight += problem.gamma(j);
            all_active = false;
        }
    }
    if (all_active) {
        if (sp.remaining < 0.0) {
            throw InfeasibleError("active constraints need more than the whole budget", sp.remaining);
        }
        sp.alpha = kNaN;
    } else {
        if (!(sp.remaining > 0.0)) {
            throw InfeasibleError("active constraints exhaust the budget (remaining " +
                                      std::to_string(sp.remaining) + ")",
                                  sp.remaining);
        }
        sp.alpha = sp.remaining / sp.unconstrained_weight;
    }
    for (std::size_t j = 0; j < J; ++j) {
        const double e = active[j] ? problem.epsilon(j) : sp.alpha;
        const auto &s = problem.allocation.portfolios[j];
        PortfolioCounts<double> c;
        c.independent.reserve(s.independent.size());
        for (double sigma : s.independent) {
            c.independent.push_back(sigma * e);
        }
        c.block_size = s.block_size;
        c.block = s.block_size > 0 ? s.block / std::sqrt(static_cast<double>(s.block_size)) * e : 0.0;
        sp.plan.portfolios.push_back(std::move(c));
        sp.multiplier.push_back(e);
        sp.variances.push_back(problem.gamma(j) / e);
    }
    return sp;
}

SlaterCheck check_slater(const ConstrainedProblem &problem) {
    problem.validate();
    double spend = 0.0;
    for (std::size_t j = 0; j < problem.size(); ++j) {
        spend += problem.gamma(j) * problem.epsilon(j);
    }
    SlaterCheck s;
    s.margin = problem.allocation.budget - spend;
    s.holds = s.margin > 0.0;
    return s;
}

ActiveSetSolution active_set_solve(const ConstrainedProblem &problem) {
    const auto slater = check_slater(problem);
    if (!slater.holds) {
        throw InfeasibleError("Slater's condition fails: caps need " +
                                  std::to_string(problem.allocation.budget - slater.margin) +
                                  " realisations against a budget of " +
                                  std::to_string(problem.allocation.budget),
                              slater.margin);
    }
    const std::size_t J = problem.size();
    ActiveSetSolution sol;
    sol.active.assign(J, false);
    StationaryPoint sp;
    for (;;) {
        sp = stationarity_solution(problem, sol.active);
        sol.alpha_trace.push_back(sp.alpha);
        std::vector<std::size_t> violated;
        for (std::size_t j = 0; j < J; ++j) {
            if (!sol.active[j] && sp.variances[j] > problem.caps[j] * (1.0 + kViolationTol)) {
                violated.push_back(j);
            }
        }
        if (violated.empty()) {
            break;
        }
        for (auto j : violated) {
            sol.active[j] = true;
            sol.added.push_back(j);
        }
        ++sol.iterations;
    }
    sol.plan = std::move(sp.plan);
    sol.variances = portfolio_variances(problem, sol.plan);
    for (double v : sol.variances) {
        sol.objective += v;
    }
    sol.delta.assign(J, 0.0);
    if (std::isnan(sp.alpha)) {
        sol.lambda = kNaN;
        sol.unspent = sp.remaining;
        for (std::size_t j = 0; j < J; ++j) {
            sol.delta[j] = kNaN;
        }
    } else {
        sol.lambda = 1.0 / (sp.alpha * sp.alpha);
        for (std::size_t j = 0; j < J; ++j) {
            if (sol.active[j]) {
                const double ratio = problem.epsilon(j) / sp.alpha;
                sol.delta[j] = ratio * ratio - 1.0;
            }
        }
    }
    return sol;
}

KktReport kkt_report(const ConstrainedProblem &problem, const ActiveSetSolution &solution) {
    KktReport r;
    const auto vars = portfolio_variances(problem, solution.plan);
    r.min_delta = std::numeric_limits<double>::infinity();
    double cost = solution.plan.cost();
    r.primal = std::abs(cost - problem.allocation.budget) / problem.allocation.budget;
    for (std::size_t j = 0; j < problem.size(); ++j) {
        const auto &s = problem.allocation.portfolios[j];
        const auto &c = solution.plan.portfolios[j];
        const double weight = 1.0 + solution.delta[j];
        const auto residual = [&](double sigma, double count, double size) {
            if (sigma == 0.0) {
                return;
            }
            const double grad = -weight * sigma * sigma / (count * count) + solution.lambda * size;
            r.stationarity = std::max(r.stationarity, std::abs(grad) / (solution.lambda * size));
        };
        for (std::size_t i = 0; i < s.independent.size(); ++i) {
            residual(s.independent[i], c.independent[i], 1.0);
        }
        if (s.block_size > 0) {
            residual(s.block, c.block, static_cast<double>(s.block_size));
        }
        if (std::isfinite(problem.caps[j])) {
            r.primal = std::max(r.primal, (vars[j] - problem.caps[j]) / problem.caps[j]);
            r.complementarity = std::max(
                r.complementarity, std::abs(solution.delta[j] * (vars[j] - problem.caps[j])) / problem.caps[j]);
        }
        r.min_delta = std::min(r.min_delta, solution.delta[j]);
    }
    return r;
}

std::optional<OracleResult> brute_force_oracle(const ConstrainedProblem &problem) {
    problem.validate();
    const std::size_t J = problem.size();
    if (J > kOracleMaxPortfolios) {
        throw ValidationError("brute-force oracle refuses " + std::to_string(J) + " portfolios (max " +
                              std::to_string(kOracleMaxPortfolios) + ")");
    }
    std::optional<OracleResult> best;
    std::size_t candidates = 0;
    for (std::uint32_t mask = 0; mask < (1u << J); ++mask) {
        std::vector<bool> active(J);
        for (std::size_t j = 0; j < J; ++j) {
            active[j] = (mask >> j) & 1u;
        }
        StationaryPoint sp;
        try {
            sp = stationarity_solution(problem, active);
        } catch (const InfeasibleError &) {
            continue;
        }
        const bool all_active = std::isnan(sp.alpha);
        if (all_active && sp.remaining > 1e-9 * problem.allocation.budget) {
            continue; // unspent budget: not a stationary point of the full problem
        }
        bool ok = true;
        for (std::size_t j = 0; j < J && ok; ++j) {
            if (active[j]) {
                ok = all_active || problem.epsilon(j) >= sp.alpha * (1.0 - 1e-12);
            } else {
                ok = sp.variances[j] <= problem.caps[j] * (1.0 + 1e-9);
            }
        }
        if (!ok) {
            continue;
        }
        ++candidates;
        double objective = 0.0;
        for (double v : portfolio_variances(problem, sp.plan)) {
            objective += v;
        }
        if (!best || objective < best->objective) {
            best = OracleResult{active, sp.plan, objective, 0};
        }
    }
    if (best) {
        best->candidates = candidates;
    }
    return best;
}

} // namespace nplmc
