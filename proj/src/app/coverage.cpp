#include "common.hpp"

#include "nplmc/error.hpp"
#include "nplmc/io.hpp"
#include "nplmc/parallel.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <filesystem>

namespace nplmc::app {

namespace {

struct Repetition {
    double center = 0.0;
    double half_width = 0.0;
    double truth = 0.0;
    double cost = 0.0;
};

struct Setup {
    std::size_t n;
    std::string plan;   ///< equal | optimized
    std::string method; ///< M1 | M2
    std::string label;
};

std::uint64_t label_hash(const std::string &s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// One repetition of the whole procedure: new population, estimation run,
/// interval, and an independent R = 1 realisation as the truth.
Repetition run_repetition(const Setup &s, const ExperimentConfig &config, const Emulator *em, std::uint32_t rep) {
    const std::uint64_t base = config.crn ? config.seed : derive_seed(config.seed, label_hash(s.label));
    const std::uint64_t pop_seed = derive_seed(base, 2ull * rep);
    const std::uint64_t run_seed = derive_seed(base, 2ull * rep + 1);

    ExperimentConfig c = config;
    c.n = s.n;
    c.population_file.clear();
    const auto pop = load_population(c, pop_seed, 1);
    const auto settings = c.settings();
    const std::string source = s.method == "M2" ? "emulator" : "pilot";

    std::optional<VarianceInputs> emulated;
    if (s.method == "M2") {
        emulated = unit_variances(pop, c, "emulator", run_seed, em, 1);
    }
    IntegerPlan plan;
    if (s.plan == "equal") {
        plan = equal_plan(pop, c.realisations);
    } else {
        const auto inputs = emulated ? *emulated : unit_variances(pop, c, source, run_seed, em, 1);
        plan = round_plan(optimal_allocation(to_sigmas(inputs, equal_plan(pop, 1), c.effective_budget())));
    }
    const auto sim = run_plan(pop, plan, settings, {{run_seed, Stream::estimation}, 1, MonthlyDetail::none});
    const double mu = estimate_mu(sim).total;
    VarianceInputs inputs;
    if (s.method == "M1") {
        inputs = sample_variances(sim);
    } else {
        inputs = *emulated;
        const auto sampled = sample_variances(sim);
        for (std::size_t j = 0; j < inputs.portfolios.size(); ++j) {
            if (plan.portfolios[j].block_size > 0 && plan.portfolios[j].block >= 2) {
                inputs.portfolios[j].block = sampled.portfolios[j].block;
            }
        }
    }
    const auto pi = prediction_interval(mu, inputs, plan, c.coverage_p, &pop);
    const auto truth = run_plan(pop, equal_plan(pop, 1), settings, {{run_seed, Stream::truth}, 1, MonthlyDetail::none});
    return {pi.center, pi.half_width, estimate_mu(truth).total, plan.cost()};
}

json rep_json(const Repetition &r) {
    return json::array({r.center, r.half_width, r.truth, r.cost});
}

Repetition rep_from(const json &j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

} // namespace

int cmd_coverage_study(const ExperimentConfig &config, std::ostream &log) {
    const int threads = resolve_threads(config.threads);
    OutputSet out(config, "coverage-study");
    if (config.repetitions < 100) {
        fmt::print(log, "warning: {} repetitions give a coverage standard error above 2 points\n", config.repetitions);
    }
    std::vector<Setup> setups;
    for (auto n : config.sizes) {
        for (const auto &m : config.methods) {
            const auto dash = m.find('-');
            setups.push_back({n, m.substr(0, dash), m.substr(dash + 1), fmt::format("N{}-{}", n, m)});
        }
    }
    std::optional<Emulator> em;
    for (const auto &s : setups) {
        if (s.method == "M2" && !em) {
            em = load_emulator(config);
        }
    }

    // Resume from a checkpoint written by an identical configuration.
    const auto checkpoint_path = out.path("coverage_checkpoint.json");
    json checkpoint{{"config_hash", config.hash()}, {"setups", json::object()}};
    if (std::filesystem::exists(checkpoint_path)) {
        const auto saved = json::parse(io::read_text(checkpoint_path));
        if (saved.value("config_hash", "") == config.hash()) {
            checkpoint = saved;
            fmt::print(log, "resuming from {}\n", checkpoint_path.string());
        }
    }

    json table = json::array();
    std::string reps_csv = "setup,repetition,center,half_width,truth,inside\n";
    for (const auto &s : setups) {
        std::vector<Repetition> reps;
        if (checkpoint["setups"].contains(s.label)) {
            for (const auto &r : checkpoint["setups"][s.label]) {
                reps.push_back(rep_from(r));
            }
        }
        while (reps.size() < config.repetitions) {
            const auto first = static_cast<std::uint32_t>(reps.size());
            const auto count = std::min<std::uint32_t>(config.checkpoint_every, config.repetitions - first);
            std::vector<Repetition> chunk(count);
            parallel_for(count, threads, [&](std::size_t k) {
                chunk[k] = run_repetition(s, config, em ? &*em : nullptr, first + static_cast<std::uint32_t>(k));
            });
            reps.insert(reps.end(), chunk.begin(), chunk.end());
            json saved = json::array();
            for (const auto &r : reps) {
                saved.push_back(rep_json(r));
            }
            checkpoint["setups"][s.label] = saved;
            io::write_text(checkpoint_path, checkpoint.dump());
            fmt::print(log, "{}: {} / {} repetitions\n", s.label, reps.size(), config.repetitions);
        }
        reps.resize(config.repetitions);
        std::size_t inside = 0;
        double length = 0.0;
        double relative = 0.0;
        double cost = 0.0;
        for (std::size_t k = 0; k < reps.size(); ++k) {
            const auto &r = reps[k];
            const bool in = r.truth >= r.center - r.half_width && r.truth <= r.center + r.half_width;
            inside += in ? 1 : 0;
            length += 2.0 * r.half_width;
            relative += 2.0 * r.half_width / r.center;
            cost += r.cost;
            reps_csv += fmt::format("{},{},{},{},{},{}\n", s.label, k, io::money(r.center), io::money(r.half_width),
                                    io::money(r.truth), in ? 1 : 0);
        }
        const double m = static_cast<double>(reps.size());
        const double coverage = static_cast<double>(inside) / m;
        table.push_back({{"setup", s.label},
                         {"n", s.n},
                         {"plan", s.plan},
                         {"method", s.method},
                         {"repetitions", reps.size()},
                         {"p", config.coverage_p},
                         {"coverage", coverage},
                         {"coverage_se", std::sqrt(coverage * (1.0 - coverage) / m)},
                         {"mean_length", cents(length / m)},
                         {"relative_uncertainty", relative / m},
                         {"mean_cost", cost / m}});
        fmt::print(log, "{:>22}  coverage {:5.1f}%  mean length {:>10}  relative uncertainty {:5.2f}%\n", s.label,
                   100.0 * coverage, io::money(length / m), 100.0 * relative / m);
    }
    out.write("coverage_reps.csv", reps_csv);
    out.write_json("coverage.json", {{"experiment", config.experiment}, {"setups", table}});
    std::filesystem::remove(checkpoint_path);
    return 0;
}

} // namespace nplmc::app
