#include "nplmc/app.hpp"
#include "nplmc/error.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <set>

namespace nplmc::app {

using nlohmann::json;

double ExperimentConfig::effective_budget() const {
    return budget > 0.0 ? budget : static_cast<double>(realisations) * static_cast<double>(n);
}

SimulationSettings ExperimentConfig::settings() const {
    return {horizon, schedule};
}

CovariateModel ExperimentConfig::covariates() const {
    return CovariateModel::with_tail_variance(tail_variance);
}

namespace {

const char *monthly_name(MonthlyDetail d) {
    switch (d) {
    case MonthlyDetail::none:
        return "none";
    case MonthlyDetail::moments:
        return "moments";
    case MonthlyDetail::paths:
        return "paths";
    }
    return "none";
}

json caps_json(const std::vector<double> &caps) {
    json out = json::array();
    for (double c : caps) {
        out.push_back(std::isinf(c) ? json(nullptr) : json(c));
    }
    return out;
}

json to_json(const ExperimentConfig &c) {
    return {
        {"experiment", c.experiment},
        {"seed", c.seed},
        {"population",
         {{"n", c.n}, {"portfolio_probs", c.portfolio_probs}, {"tail_variance", c.tail_variance},
          {"file", c.population_file}}},
        {"simulation",
         {{"horizon", c.horizon},
          {"schedule", {{"times", c.schedule.times}, {"capacities", c.schedule.capacities}}},
          {"monthly", monthly_name(c.monthly)}}},
        {"plan",
         {{"mode", c.plan_mode},
          {"realisations", c.realisations},
          {"budget", c.budget},
          {"sigma_source", c.sigma_source},
          {"n_pilot", c.n_pilot},
          {"reference_realisations", c.reference_realisations},
          {"include_pilot_cost", c.include_pilot_cost},
          {"evaluate_reference", c.evaluate_reference},
          {"caps", caps_json(c.caps)},
          {"file", c.plan_file},
          {"problem_file", c.problem_file}}},
        {"interval", {{"method", c.interval_method}, {"p", c.coverage_p}}},
        {"emulator",
         {{"file", c.emulator_file},
          {"mode", c.emulator_mode == EmulatorMode::per_segment ? "per_segment" : "per_slice"},
          {"point", c.point_prediction == PointPrediction::median ? "median" : "mean"},
          {"points_per_slice", c.points_per_slice},
          {"K", c.training_realisations},
          {"test_points_per_slice", c.test_points_per_slice},
          {"test_K", c.test_realisations},
          {"exchange_iterations", c.exchange_iterations}}},
        {"coverage",
         {{"repetitions", c.repetitions},
          {"sizes", c.sizes},
          {"methods", c.methods},
          {"crn", c.crn},
          {"checkpoint_every", c.checkpoint_every}}},
        {"oracle",
         {{"instances", c.oracle_instances},
          {"min_portfolios", c.oracle_min_portfolios},
          {"max_portfolios", c.oracle_max_portfolios}}},
    };
}

void check_keys(const json &obj, const std::string &where, std::initializer_list<const char *> allowed) {
    if (!obj.is_object()) {
        throw ValidationError("config: '" + where + "' must be an object");
    }
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto &[key, value] : obj.items()) {
        if (!ok.count(key)) {
            throw ValidationError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
        }
    }
}

template <class T> void read(const json &obj, const char *key, T &target) {
    if (const auto it = obj.find(key); it != obj.end()) {
        target = it->get<T>();
    }
}

void validate(const ExperimentConfig &c) {
    const std::set<std::string> modes{"equal", "optimized", "constrained"};
    const std::set<std::string> sources{"pilot", "emulator", "reference"};
    const std::set<std::string> methods{"equal-M1", "equal-M2", "optimized-M1", "optimized-M2"};
    if (!modes.count(c.plan_mode)) {
        throw ValidationError("config: plan.mode must be equal, optimized or constrained");
    }
    if (!sources.count(c.sigma_source)) {
        throw ValidationError("config: plan.sigma_source must be pilot, emulator or reference");
    }
    if (c.interval_method != "M1" && c.interval_method != "M2") {
        throw ValidationError("config: interval.method must be M1 or M2");
    }
    for (const auto &m : c.methods) {
        if (!methods.count(m)) {
            throw ValidationError("config: unknown coverage method '" + m + "'");
        }
    }
    if (c.realisations == 0) {
        throw ValidationError("config: plan.realisations must be at least 1");
    }
    if (c.repetitions == 0) {
        throw ValidationError("config: coverage.repetitions must be at least 1");
    }
    if (c.checkpoint_every == 0) {
        throw ValidationError("config: coverage.checkpoint_every must be at least 1");
    }
    if (!(c.coverage_p > 0.0 && c.coverage_p < 1.0)) {
        throw ValidationError("config: interval.p must lie in (0, 1)");
    }
    if (c.budget < 0.0) {
        throw ValidationError("config: plan.budget must be non-negative");
    }
    if (c.oracle_min_portfolios < 1 || c.oracle_max_portfolios < c.oracle_min_portfolios ||
        c.oracle_max_portfolios > 12) {
        throw ValidationError("config: oracle portfolio range must satisfy 1 <= min <= max <= 12");
    }
    c.schedule.validate(c.horizon);
}

} // namespace

ExperimentConfig apply_config_json(const std::string &text, ExperimentConfig c) {
    json doc;
    try {
        doc = json::parse(text, nullptr, true, true);
    } catch (const json::exception &e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        check_keys(doc, "",
                   {"experiment", "seed", "threads", "out", "population", "simulation", "plan", "interval",
                    "emulator", "coverage", "oracle"});
        read(doc, "experiment", c.experiment);
        read(doc, "seed", c.seed);
        read(doc, "threads", c.threads);
        read(doc, "out", c.out);
        if (doc.contains("population")) {
            const auto &p = doc["population"];
            check_keys(p, "population", {"n", "portfolio_probs", "tail_variance", "file"});
            read(p, "n", c.n);
            read(p, "portfolio_probs", c.portfolio_probs);
            read(p, "tail_variance", c.tail_variance);
            read(p, "file", c.population_file);
        }
        if (doc.contains("simulation")) {
            const auto &s = doc["simulation"];
            check_keys(s, "simulation", {"horizon", "schedule", "monthly"});
            read(s, "horizon", c.horizon);
            if (s.contains("schedule")) {
                const auto &t = s["schedule"];
                check_keys(t, "simulation.schedule", {"times", "capacities"});
                c.schedule.times = t.value("times", std::vector<int>{});
                c.schedule.capacities = t.value("capacities", std::vector<int>{});
            }
            if (s.contains("monthly")) {
                const auto m = s["monthly"].get<std::string>();
                if (m == "none") {
                    c.monthly = MonthlyDetail::none;
                } else if (m == "moments") {
                    c.monthly = MonthlyDetail::moments;
                } else if (m == "paths") {
                    c.monthly = MonthlyDetail::paths;
                } else {
                    throw ValidationError("config: simulation.monthly must be none, moments or paths");
                }
            }
        }
        if (doc.contains("plan")) {
            const auto &p = doc["plan"];
            check_keys(p, "plan",
                       {"mode", "realisations", "budget", "sigma_source", "n_pilot", "reference_realisations",
                        "include_pilot_cost", "evaluate_reference", "caps", "file", "problem_file"});
            read(p, "mode", c.plan_mode);
            read(p, "realisations", c.realisations);
            read(p, "budget", c.budget);
            read(p, "sigma_source", c.sigma_source);
            read(p, "n_pilot", c.n_pilot);
            read(p, "reference_realisations", c.reference_realisations);
            read(p, "include_pilot_cost", c.include_pilot_cost);
            read(p, "evaluate_reference", c.evaluate_reference);
            read(p, "file", c.plan_file);
            read(p, "problem_file", c.problem_file);
            if (p.contains("caps")) {
                c.caps.clear();
                for (const auto &v : p["caps"]) {
                    c.caps.push_back(v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>());
                }
            }
        }
        if (doc.contains("interval")) {
            const auto &i = doc["interval"];
            check_keys(i, "interval", {"method", "p"});
            read(i, "method", c.interval_method);
            read(i, "p", c.coverage_p);
        }
        if (doc.contains("emulator")) {
            const auto &e = doc["emulator"];
            check_keys(e, "emulator",
                       {"file", "mode", "point", "points_per_slice", "K", "test_points_per_slice", "test_K",
                        "exchange_iterations"});
            read(e, "file", c.emulator_file);
            if (e.contains("mode")) {
                const auto m = e["mode"].get<std::string>();
                if (m != "per_segment" && m != "per_slice") {
                    throw ValidationError("config: emulator.mode must be per_segment or per_slice");
                }
                c.emulator_mode = m == "per_segment" ? EmulatorMode::per_segment : EmulatorMode::per_slice;
            }
            if (e.contains("point")) {
                const auto m = e["point"].get<std::string>();
                if (m != "median" && m != "mean") {
                    throw ValidationError("config: emulator.point must be median or mean");
                }
                c.point_prediction = m == "median" ? PointPrediction::median : PointPrediction::mean;
            }
            read(e, "points_per_slice", c.points_per_slice);
            read(e, "K", c.training_realisations);
            read(e, "test_points_per_slice", c.test_points_per_slice);
            read(e, "test_K", c.test_realisations);
            read(e, "exchange_iterations", c.exchange_iterations);
        }
        if (doc.contains("coverage")) {
            const auto &v = doc["coverage"];
            check_keys(v, "coverage", {"repetitions", "sizes", "methods", "crn", "checkpoint_every"});
            read(v, "repetitions", c.repetitions);
            read(v, "sizes", c.sizes);
            read(v, "methods", c.methods);
            read(v, "crn", c.crn);
            read(v, "checkpoint_every", c.checkpoint_every);
        }
        if (doc.contains("oracle")) {
            const auto &o = doc["oracle"];
            check_keys(o, "oracle", {"instances", "min_portfolios", "max_portfolios"});
            read(o, "instances", c.oracle_instances);
            read(o, "min_portfolios", c.oracle_min_portfolios);
            read(o, "max_portfolios", c.oracle_max_portfolios);
        }
    } catch (const json::exception &e) {
        throw ValidationError(std::string("config: wrong value type: ") + e.what());
    }
    validate(c);
    return c;
}

std::string ExperimentConfig::canonical_json() const {
    return to_json(*this).dump();
}

std::string ExperimentConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : canonical_json()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return fmt::format("{:016x}", h);
}

} // namespace nplmc::app
