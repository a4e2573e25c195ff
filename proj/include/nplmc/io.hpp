#pragma once

#include "nplmc/constrained.hpp"
#include "nplmc/emulator.hpp"
#include "nplmc/estimators.hpp"
#include "nplmc/plan.hpp"
#include "nplmc/population.hpp"
#include "nplmc/simulator.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace nplmc::io {

/// Money in reports: two decimals, fixed.
std::string money(double x);

/// Writes `text` to `path`, creating parent directories; throws Error on failure.
void write_text(const std::filesystem::path &path, const std::string &text);
std::string read_text(const std::filesystem::path &path);

/// id,balance,credit_score,segment,eligible,paid_last_month,portfolio
/// (full precision so a population can be read back exactly).
std::string population_csv(const Population &pop);
Population population_from_csv(const std::string &text);

/// unit_id,kind,portfolio,count_real,count_int. Independent rows carry the
/// account id; block rows carry the portfolio index as unit id.
std::string plan_csv(const Population &pop, const IntegerPlan &plan, const RealPlan *real = nullptr);
IntegerPlan plan_from_csv(const std::string &text, const Population &pop);

/// account_id,realisation,total
std::string totals_csv(const Population &pop, const SimulationOutput &out);
/// account_id,realisation,month,collections (needs full paths)
std::string monthly_csv(const Population &pop, const SimulationOutput &out);
/// month,mean,lower,upper
std::string curve_csv(const std::vector<double> &mean, const std::vector<PredictionInterval> *bands);

/// design CSV: slice,segment,y0,b_tilde,c_tilde
std::string design_csv(const SlicedDesign &design);
/// b_tilde,c_tilde,segment,y0,log_var,kurtosis,noise_var
std::string training_csv(const TrainingData &data);

/// Reads the constrained-problem JSON document:
/// {"budget": C, "portfolios": [{"sigma": [...], "block_sigma": s, "block_size": n, "cap": V}]}
/// A missing or null cap means no constraint.
ConstrainedProblem problem_from_json(const std::string &text);

} // namespace nplmc::io
