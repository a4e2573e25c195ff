#pragma once

#include "nplmc/allocator.hpp"
#include "nplmc/app.hpp"
#include "nplmc/constrained.hpp"
#include "nplmc/emulator.hpp"
#include "nplmc/estimators.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace nplmc::app {

using nlohmann::json;

/// Output directory plus the sidecar written next to every file.
class OutputSet {
  public:
    OutputSet(const ExperimentConfig &config, std::string command);
    void write(const std::string &name, const std::string &text);
    void write_json(const std::string &name, const json &doc);
    [[nodiscard]] std::filesystem::path path(const std::string &name) const { return dir_ / name; }

  private:
    const ExperimentConfig &config_;
    std::string command_;
    std::filesystem::path dir_;
};

/// Rounded to cents for reports.
double cents(double x);

Population load_population(const ExperimentConfig &config, std::uint64_t seed, int threads);
Emulator load_emulator(const ExperimentConfig &config);

/// Unit variances from the requested source: pilot runs, the emulator
/// (block variance still from pilot runs) or long reference runs.
VarianceInputs unit_variances(const Population &pop, const ExperimentConfig &config,
                              const std::string &source, std::uint64_t seed, const Emulator *emulator,
                              int threads);

struct BuiltPlan {
    IntegerPlan plan;
    std::optional<RealPlan> real;
    std::optional<VarianceInputs> inputs;
    std::optional<ConstrainedProblem> problem;
    std::optional<ActiveSetSolution> solution;
    double budget = 0.0;
};

BuiltPlan build_plan(const Population &pop, const ExperimentConfig &config, const std::string &mode,
                     const std::string &source, std::uint64_t seed, const Emulator *emulator, int threads);

json kkt_json(const KktReport &k);
json metrics_json(const EmulatorMetrics &m, const Emulator &em);
json interval_json(const PredictionInterval &pi);

int cmd_simulate(const ExperimentConfig &config, std::ostream &log);
int cmd_allocate(const ExperimentConfig &config, std::ostream &log);
int cmd_protect(const ExperimentConfig &config, std::ostream &log);
int cmd_interval(const ExperimentConfig &config, std::ostream &log);
int cmd_coverage_study(const ExperimentConfig &config, std::ostream &log);
int cmd_train_emulator(const ExperimentConfig &config, std::ostream &log);
int cmd_validate_emulator(const ExperimentConfig &config, std::ostream &log);
int cmd_oracle_check(const ExperimentConfig &config, std::ostream &log);

} // namespace nplmc::app
