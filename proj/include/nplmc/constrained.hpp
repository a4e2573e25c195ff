#pragma once

#include "nplmc/allocator.hpp"
#include "nplmc/plan.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace nplmc {

/// Minimise sum_j Var(mu_hat_j) subject to the budget and Var(mu_hat_j) <= V_j.
struct ConstrainedProblem {
    AllocationInputs allocation;
    std::vector<double> caps; ///< V_j, may be +infinity

    [[nodiscard]] std::size_t size() const noexcept { return caps.size(); }
    /// sqrt(|D_j|) sigma_D,j + sum_{i in I_j} sigma_i
    [[nodiscard]] double gamma(std::size_t j) const;
    /// gamma_j / V_j: the multiplier that spends exactly enough to meet the cap.
    [[nodiscard]] double epsilon(std::size_t j) const;
    void validate() const;
};

/// Var(mu_hat_j) of each portfolio under a real plan; zero-sigma units add nothing.
std::vector<double> portfolio_variances(const ConstrainedProblem &problem, const RealPlan &plan);

/// Plan that is stationary for the Lagrangian with active set B.
struct StationaryPoint {
    RealPlan plan;
    std::vector<double> multiplier; ///< e_j: epsilon_j on B, alpha elsewhere
    std::vector<double> variances;  ///< Var(mu_hat_j) = gamma_j / e_j
    double alpha = 0.0;             ///< C_rem / d; NaN when B holds every portfolio
    double remaining = 0.0;         ///< C_rem = C - sum_{j in B} epsilon_j gamma_j
    double unconstrained_weight = 0.0; ///< d = sum_{j not in B} gamma_j
};

/// Throws InfeasibleError when the active constraints alone exhaust the budget.
/// With every portfolio active the plan is returned as is; `remaining` is
/// then the unspent budget.
StationaryPoint stationarity_solution(const ConstrainedProblem &problem,
                                      const std::vector<bool> &active);

struct SlaterCheck {
    bool holds = false;
    double margin = 0.0; ///< C - sum_j gamma_j epsilon_j
};

SlaterCheck check_slater(const ConstrainedProblem &problem);

struct ActiveSetSolution {
    std::vector<bool> active;
    RealPlan plan;
    std::vector<double> variances;
    double objective = 0.0;
    double lambda = 0.0;
    std::vector<double> delta;       ///< zero off the active set
    std::vector<double> alpha_trace; ///< alpha(B) after each solve
    std::vector<std::size_t> added;  ///< portfolios added per pass, flattened
    int iterations = 0;              ///< passes that added constraints
    double unspent = 0.0;            ///< non-zero only if every portfolio is active
};

/// Active-set iteration: solve with B empty, add every portfolio whose cap is
/// violated, re-solve, and stop after a pass that adds nothing. Constraints
/// are never removed. Throws InfeasibleError (with the margin) when Slater's
/// condition fails.
ActiveSetSolution active_set_solve(const ConstrainedProblem &problem);

struct KktReport {
    double stationarity = 0.0;   ///< max relative gradient residual over units
    double primal = 0.0;         ///< max relative cap violation and budget residual
    double min_delta = 0.0;
    double complementarity = 0.0; ///< max |delta_j (Var_j - V_j)| / V_j
};

KktReport kkt_report(const ConstrainedProblem &problem, const ActiveSetSolution &solution);

struct OracleResult {
    std::vector<bool> active;
    RealPlan plan;
    double objective = 0.0;
    std::size_t candidates = 0; ///< subsets passing all checks
};

inline constexpr std::size_t kOracleMaxPortfolios = 12;

/// Enumerates every active set, keeps the stationary points that satisfy
/// primal and dual feasibility and returns the best. Empty when none does.
std::optional<OracleResult> brute_force_oracle(const ConstrainedProblem &problem);

} // namespace nplmc
