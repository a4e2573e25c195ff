#include "common.hpp"

#include "nplmc/error.hpp"
#include "nplmc/io.hpp"
#include "nplmc/parallel.hpp"

#include <cmath>

namespace nplmc::app {

OutputSet::OutputSet(const ExperimentConfig &config, std::string command)
    : config_(config), command_(std::move(command)), dir_(config.out) {}

void OutputSet::write(const std::string &name, const std::string &text) {
    io::write_text(dir_ / name, text);
    const json meta{{"file", name},
                    {"command", command_},
                    {"experiment", config_.experiment},
                    {"config_hash", config_.hash()},
                    {"seed", config_.seed},
                    {"version", kVersion}};
    io::write_text(dir_ / (name + ".meta.json"), meta.dump(1) + "\n");
}

void OutputSet::write_json(const std::string &name, const json &doc) {
    write(name, doc.dump(1) + "\n");
}

double cents(double x) {
    return std::isfinite(x) ? std::round(x * 100.0) / 100.0 : x;
}

Population load_population(const ExperimentConfig &config, std::uint64_t seed, int threads) {
    if (!config.population_file.empty()) {
        return io::population_from_csv(io::read_text(config.population_file));
    }
    PopulationParams params;
    params.n = config.n;
    params.portfolio_probs = config.portfolio_probs;
    params.covariates = config.covariates();
    return init_population(params, seed, threads);
}

Emulator load_emulator(const ExperimentConfig &config) {
    if (config.emulator_file.empty()) {
        throw ValidationError("this command needs an emulator: set emulator.file (train one with train-emulator)");
    }
    if (!std::filesystem::exists(config.emulator_file)) {
        throw ValidationError("emulator file " + config.emulator_file + " does not exist");
    }
    auto em = emulator_from_json(io::read_text(config.emulator_file));
    em.set_point(config.point_prediction);
    return em;
}

VarianceInputs unit_variances(const Population &pop, const ExperimentConfig &config,
                              const std::string &source, std::uint64_t seed, const Emulator *emulator,
                              int threads) {
    const auto settings = config.settings();
    if (source == "reference") {
        return reference_variances(pop, settings, config.reference_realisations, seed, threads);
    }
    if (source == "pilot") {
        if (config.n_pilot < 2) {
            throw ValidationError("plan.n_pilot must be at least 2");
        }
        const auto out = run_plan(pop, equal_plan(pop, config.n_pilot), settings,
                                  {{seed, Stream::pilot}, threads, MonthlyDetail::none});
        return sample_variances(out);
    }
    if (!emulator) {
        throw ValidationError("sigma source 'emulator' needs an emulator file");
    }
    VarianceInputs in;
    in.source = VarianceSource::emulator;
    for (const auto &idx : pop.portfolios) {
        PortfolioVariances pv;
        pv.independent.resize(idx.independent_ids.size());
        parallel_for(idx.independent_ids.size(), threads, [&](std::size_t i) {
            pv.independent[i] = emulator->predict(pop.account(idx.independent_ids[i])).variance;
        });
        if (!idx.dependent_ids.empty()) {
            std::vector<Account> block;
            for (auto id : idx.dependent_ids) {
                block.push_back(pop.account(id));
            }
            pv.block = pilot_block_variance(block, settings, config.n_pilot, seed);
        }
        in.portfolios.push_back(std::move(pv));
    }
    return in;
}

BuiltPlan build_plan(const Population &pop, const ExperimentConfig &config, const std::string &mode,
                     const std::string &source, std::uint64_t seed, const Emulator *emulator, int threads) {
    BuiltPlan b;
    b.budget = config.effective_budget();
    if (mode == "equal") {
        b.plan = equal_plan(pop, config.realisations);
        return b;
    }
    if (config.include_pilot_cost && source != "reference") {
        // Pilot block runs always happen; pilot runs of independent accounts only for the pilot source.
        double pilot = 0.0;
        for (const auto &idx : pop.portfolios) {
            pilot += static_cast<double>(idx.dependent_ids.size());
            if (source == "pilot") {
                pilot += static_cast<double>(idx.independent_ids.size());
            }
        }
        b.budget -= pilot * config.n_pilot;
        if (!(b.budget > 0.0)) {
            throw ValidationError("pilot realisations use up the whole budget");
        }
    }
    b.inputs = unit_variances(pop, config, source, seed, emulator, threads);
    const auto sigmas = to_sigmas(*b.inputs, equal_plan(pop, 1), b.budget);
    if (mode == "optimized") {
        b.real = optimal_allocation(sigmas);
    } else if (mode == "constrained") {
        if (config.caps.size() != pop.portfolios.size()) {
            throw ValidationError("plan.caps needs one entry per portfolio (" +
                                  std::to_string(pop.portfolios.size()) + ")");
        }
        b.problem = ConstrainedProblem{sigmas, config.caps};
        b.solution = active_set_solve(*b.problem);
        b.real = b.solution->plan;
    } else {
        throw ValidationError("unknown plan mode " + mode);
    }
    b.plan = round_plan(*b.real);
    return b;
}

json kkt_json(const KktReport &k) {
    return {{"stationarity", k.stationarity},
            {"primal", k.primal},
            {"min_delta", k.min_delta},
            {"complementarity", k.complementarity}};
}

json interval_json(const PredictionInterval &pi) {
    return {{"center", cents(pi.center)},
            {"half_width", cents(pi.half_width)},
            {"lower", cents(pi.lower())},
            {"upper", cents(pi.upper())},
            {"p", pi.coverage_p},
            {"relative_uncertainty", 2.0 * pi.half_width / pi.center}};
}

json metrics_json(const EmulatorMetrics &m, const Emulator &em) {
    const auto group = [](const EmulatorMetrics::Group &g) {
        return json{{"n", g.n}, {"log_rmse", g.log_rmse}, {"correlation", g.correlation}, {"coverage", g.coverage}};
    };
    json groups = json::array();
    for (std::size_t g = 0; g < m.groups.size(); ++g) {
        auto entry = group(m.groups[g]);
        if (em.mode() == EmulatorMode::per_segment) {
            entry["segment"] = g + 1;
        } else {
            entry["segment"] = g / 2 + 1;
            entry["y0"] = g % 2;
        }
        groups.push_back(entry);
    }
    return {{"mode", em.mode() == EmulatorMode::per_segment ? "per_segment" : "per_slice"},
            {"groups", groups},
            {"pooled", group(m.pooled)},
            {"dropped_zero_variance", m.dropped}};
}

} // namespace nplmc::app
