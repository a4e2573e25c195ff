#pragma once

#include "nplmc/philox.hpp"
#include "nplmc/plan.hpp"
#include "nplmc/population.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nplmc {

inline constexpr int kDefaultHorizon = 84;

/// Months at which capacity-limited 3 -> 1 segment transitions happen.
struct TransitionSchedule {
    std::vector<int> times;
    std::vector<int> capacities;

    /// Six transitions of ten accounts at months 6, 12, ..., 36.
    static TransitionSchedule standard();
    static TransitionSchedule none() { return {}; }
    void validate(int horizon) const;

    friend bool operator==(const TransitionSchedule &, const TransitionSchedule &) = default;
};

struct SimulationSettings {
    int horizon = kDefaultHorizon;
    TransitionSchedule schedule = TransitionSchedule::standard();
};

/// Logistic payment model; only meaningful while the balance is positive.
double payment_probability(double credit_score, Segment segment, bool paid_prev) noexcept;

/// One realised path: monthly collections and their sum.
struct CollectionsPath {
    std::vector<double> monthly;
    double total = 0.0;
};

/// Randomness of one simulation run. Month t of realisation k of account i
/// is driven by draw t of CounterStream(seed, stream, i, k).
struct RunKey {
    std::uint64_t seed = 0;
    Stream stream = Stream::estimation;
};

/// Single realisation of an account whose segment never changes.
CollectionsPath simulate_independent(const Account &account, int horizon, RunKey key,
                                     std::uint32_t realisation);

/// `count` realisations starting at `first`, through the active SIMD kernel.
/// `monthly`, when non-empty, receives count x horizon values row-major.
void simulate_independent_batch(const Account &account, int horizon, RunKey key,
                                std::uint32_t first, std::span<double> totals,
                                std::span<double> monthly = {});

/// Joint realisation of a dependent block.
struct BlockPath {
    std::vector<CollectionsPath> members; ///< same order as the input accounts
    double total = 0.0;
    /// Month (1-based) each member moved to segment 1, 0 if it never did.
    std::vector<int> transition_month;
};

/// Simulates the members of one block together. At each scheduled month the
/// accounts that are eligible, currently in segment 3 and did not pay in the
/// previous month are ranked by credit score (ties: lower id first) and the
/// best `capacity` of them move to segment 1 before that month is simulated.
BlockPath simulate_dependent_block(std::span<const Account> accounts,
                                   const TransitionSchedule &schedule, int horizon, RunKey key,
                                   std::uint32_t realisation);

enum class MonthlyDetail {
    none,    ///< totals only
    moments, ///< plus per-month means and variances
    paths,   ///< plus every monthly path
};

/// Running mean and sum of squared deviations for each month.
struct MonthlyMoments {
    std::vector<double> mean;
    std::vector<double> m2;
    std::uint32_t count = 0;

    void reset(int horizon);
    void add(std::span<const double> month_values);
    /// Unbiased sample variance of month t (requires count >= 2).
    [[nodiscard]] double variance(std::size_t t) const;
};

struct PortfolioOutput {
    std::vector<std::vector<double>> independent_totals; ///< [account][realisation]
    std::vector<std::vector<double>> member_totals;      ///< [block member][realisation]
    std::vector<double> block_totals;                    ///< [realisation]

    std::vector<MonthlyMoments> independent_monthly;
    std::vector<MonthlyMoments> member_monthly;
    MonthlyMoments block_monthly;

    std::vector<std::vector<double>> independent_paths; ///< [account][realisation * horizon + t]
    std::vector<std::vector<double>> member_paths;
};

struct SimulationOutput {
    int horizon = kDefaultHorizon;
    MonthlyDetail detail = MonthlyDetail::none;
    std::vector<PortfolioOutput> portfolios;
};

struct RunOptions {
    RunKey key{};
    int threads = 1;
    MonthlyDetail detail = MonthlyDetail::none;
};

/// Executes an integer plan: R_i independent realisations per independent
/// account and r_j joint realisations per dependent block.
SimulationOutput run_plan(const Population &pop, const IntegerPlan &plan,
                          const SimulationSettings &settings, const RunOptions &options);

} // namespace nplmc
