#pragma once

#include "nplmc/emulator.hpp"
#include "nplmc/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nplmc::app {

inline constexpr const char *kVersion = "0.1.0";

/// Everything a command needs. Defaults reproduce the reference setup; see
/// README.md for the file grammar.
struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 1;
    int threads = 0; ///< 0: all logical cores; never affects results
    std::string out = "out";

    // population
    std::size_t n = 1000;
    std::vector<double> portfolio_probs{1.0};
    double tail_variance = 0.1;
    std::string population_file;

    // simulation
    int horizon = kDefaultHorizon;
    TransitionSchedule schedule = TransitionSchedule::standard();
    MonthlyDetail monthly = MonthlyDetail::moments;

    // plan
    std::string plan_mode = "equal"; ///< equal | optimized | constrained
    std::uint32_t realisations = 30;
    double budget = 0.0;             ///< 0: realisations * n
    std::string sigma_source = "pilot"; ///< pilot | emulator | reference
    std::uint32_t n_pilot = 50;
    std::uint32_t reference_realisations = 5000;
    bool include_pilot_cost = false;
    bool evaluate_reference = false;
    std::vector<double> caps; ///< +inf where unconstrained
    std::string plan_file;
    std::string problem_file;

    // intervals
    std::string interval_method = "M1"; ///< M1 | M2
    double coverage_p = 0.95;

    // emulator
    std::string emulator_file;
    EmulatorMode emulator_mode = EmulatorMode::per_segment;
    PointPrediction point_prediction = PointPrediction::median;
    std::size_t points_per_slice = 100;
    std::uint32_t training_realisations = 1000;
    std::size_t test_points_per_slice = 100;
    std::uint32_t test_realisations = 1000;
    int exchange_iterations = 2000;

    // coverage study
    std::uint32_t repetitions = 1000;
    std::vector<std::size_t> sizes{100, 250, 1000};
    std::vector<std::string> methods{"equal-M1", "optimized-M2"};
    bool crn = false;
    std::uint32_t checkpoint_every = 100;

    // oracle check
    std::uint32_t oracle_instances = 200;
    std::size_t oracle_min_portfolios = 2;
    std::size_t oracle_max_portfolios = 6;

    [[nodiscard]] double effective_budget() const;
    [[nodiscard]] SimulationSettings settings() const;
    [[nodiscard]] CovariateModel covariates() const;

    /// Canonical JSON of every setting that can change a result (threads and
    /// the output directory are left out).
    [[nodiscard]] std::string canonical_json() const;
    /// FNV-1a 64 of canonical_json(), hex.
    [[nodiscard]] std::string hash() const;
};

/// Applies a JSON config document on top of `base`. Unknown keys are an error.
ExperimentConfig apply_config_json(const std::string &text, ExperimentConfig base = {});

const std::vector<std::string> &command_names();

/// Runs one subcommand; returns the process exit code. Progress goes to `log`.
int run_command(const std::string &command, const ExperimentConfig &config, std::ostream &log);

} // namespace nplmc::app
