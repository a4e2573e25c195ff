#include "common.hpp"

#include "nplmc/error.hpp"
#include "nplmc/instances.hpp"
#include "nplmc/io.hpp"
#include "nplmc/parallel.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <limits>
#include <numeric>

namespace nplmc::app {

namespace {

json account_stats(const Population &pop, const SimulationOutput &out) {
    json rows = json::array();
    const auto stats = [&](AccountId id, const std::vector<double> &totals) {
        json r{{"id", id}, {"realisations", totals.size()}};
        r["mean"] = cents(std::accumulate(totals.begin(), totals.end(), 0.0) / static_cast<double>(totals.size()));
        if (totals.size() >= 2) {
            const auto m = sample_moments(totals, totals.size() >= 4);
            r["variance"] = cents(m.variance);
            r["kurtosis"] = std::isnan(m.kurtosis) ? json(nullptr) : json(m.kurtosis);
        } else {
            r["variance"] = nullptr;
            r["kurtosis"] = nullptr;
        }
        return r;
    };
    std::vector<json> by_id(pop.size());
    for (std::size_t j = 0; j < out.portfolios.size(); ++j) {
        const auto &po = out.portfolios[j];
        const auto &idx = pop.portfolios[j];
        for (std::size_t i = 0; i < po.independent_totals.size(); ++i) {
            by_id[idx.independent_ids[i]] = stats(idx.independent_ids[i], po.independent_totals[i]);
            by_id[idx.independent_ids[i]]["dependent"] = false;
        }
        for (std::size_t m = 0; m < po.member_totals.size(); ++m) {
            by_id[idx.dependent_ids[m]] = stats(idx.dependent_ids[m], po.member_totals[m]);
            by_id[idx.dependent_ids[m]]["dependent"] = true;
        }
    }
    for (auto &r : by_id) {
        rows.push_back(std::move(r));
    }
    return rows;
}

bool all_at_least_two(const IntegerPlan &plan) {
    for (const auto &p : plan.portfolios) {
        for (auto c : p.independent) {
            if (c < 2) {
                return false;
            }
        }
        if (p.block_size > 0 && p.block < 2) {
            return false;
        }
    }
    return true;
}

std::vector<double> mean_counts(const IntegerPlan &plan) {
    std::vector<double> out;
    for (const auto &p : plan.portfolios) {
        double total = static_cast<double>(p.block) * static_cast<double>(p.block_size);
        for (auto c : p.independent) {
            total += c;
        }
        const auto size = static_cast<double>(p.independent.size() + p.block_size);
        out.push_back(size > 0 ? total / size : 0.0);
    }
    return out;
}

json vector_cents(const std::vector<double> &v) {
    json out = json::array();
    for (double x : v) {
        out.push_back(cents(x));
    }
    return out;
}

/// Variance of mu_hat for a plan and for the equal plan with the same budget,
/// both under long-run reference variances.
json reference_evaluation(const Population &pop, const ExperimentConfig &config, const IntegerPlan &plan,
                          int threads, std::ostream &log) {
    fmt::print(log, "reference variances from {} realisations per account\n", config.reference_realisations);
    const auto ref = reference_variances(pop, config.settings(), config.reference_realisations,
                                         derive_seed(config.seed, 6), threads);
    const auto equal_r = std::max<std::uint32_t>(
        1, static_cast<std::uint32_t>(std::lround(plan.cost() / static_cast<double>(pop.size()))));
    const auto equal = equal_plan(pop, equal_r);
    const double v_plan = estimator_variance(ref, plan).total;
    const double v_equal = estimator_variance(ref, equal).total;
    return {{"plan_variance", cents(v_plan)},
            {"equal_plan_variance", cents(v_equal)},
            {"equal_realisations", equal_r},
            {"reduction", 1.0 - v_plan / v_equal}};
}

} // namespace

int cmd_simulate(const ExperimentConfig &config, std::ostream &log) {
    const int threads = resolve_threads(config.threads);
    OutputSet out(config, "simulate");
    const auto pop = load_population(config, config.seed, threads);
    std::optional<Emulator> em;
    if (config.plan_mode != "equal" && config.sigma_source == "emulator") {
        em = load_emulator(config);
    }
    BuiltPlan built;
    if (!config.plan_file.empty()) {
        built.plan = io::plan_from_csv(io::read_text(config.plan_file), pop);
    } else {
        built = build_plan(pop, config, config.plan_mode, config.sigma_source, derive_seed(config.seed, 4),
                           em ? &*em : nullptr, threads);
    }
    fmt::print(log, "simulating {} accounts, {} account-realisations\n", pop.size(), built.plan.cost());
    const auto sim = run_plan(pop, built.plan, config.settings(),
                              {{derive_seed(config.seed, 2), Stream::estimation}, threads, config.monthly});
    const auto mu = estimate_mu(sim);

    json summary{{"experiment", config.experiment},
                 {"accounts", pop.size()},
                 {"plan_mode", config.plan_file.empty() ? config.plan_mode : "file"},
                 {"cost", built.plan.cost()},
                 {"mu", cents(mu.total)},
                 {"mu_portfolio", vector_cents(mu.portfolio)}};
    const bool enough = all_at_least_two(built.plan);
    if (enough) {
        const auto v = sample_variances(sim);
        const auto ev = estimator_variance(v, built.plan);
        summary["estimator_variance"] = cents(ev.total);
        summary["estimator_variance_portfolio"] = vector_cents(ev.portfolio);
        summary["interval"] = interval_json(prediction_interval(mu.total, v, built.plan, config.coverage_p, &pop));
    } else {
        summary["interval"] = nullptr;
        summary["note"] = "sample-variance quantities need at least 2 realisations for every account";
    }
    if (config.evaluate_reference) {
        summary["reference_evaluation"] = reference_evaluation(pop, config, built.plan, threads, log);
    }
    summary["account_stats"] = account_stats(pop, sim);

    out.write("population.csv", io::population_csv(pop));
    out.write("plan.csv", io::plan_csv(pop, built.plan, built.real ? &*built.real : nullptr));
    out.write("totals.csv", io::totals_csv(pop, sim));
    if (config.monthly != MonthlyDetail::none) {
        const auto monthly_mu = estimate_monthly_mu(sim);
        if (enough) {
            const auto bands = monthly_bands(sim, built.plan, config.coverage_p);
            out.write("curve.csv", io::curve_csv(monthly_mu, &bands));
        } else {
            out.write("curve.csv", io::curve_csv(monthly_mu, nullptr));
        }
    }
    if (config.monthly == MonthlyDetail::paths) {
        out.write("monthly.csv", io::monthly_csv(pop, sim));
    }
    out.write_json("summary.json", summary);
    fmt::print(log, "mu_hat = {}\n", io::money(mu.total));
    return 0;
}

int cmd_allocate(const ExperimentConfig &config, std::ostream &log) {
    const int threads = resolve_threads(config.threads);
    OutputSet out(config, "allocate");
    const auto pop = load_population(config, config.seed, threads);
    std::optional<Emulator> em;
    if (config.sigma_source == "emulator") {
        em = load_emulator(config);
    }
    const std::string mode = config.plan_mode == "equal" ? "optimized" : config.plan_mode;
    const auto built = build_plan(pop, config, mode, config.sigma_source, derive_seed(config.seed, 4),
                                  em ? &*em : nullptr, threads);
    const auto equal_r = std::max<std::uint32_t>(
        1, static_cast<std::uint32_t>(std::lround(built.budget / static_cast<double>(pop.size()))));
    const auto equal = equal_plan(pop, equal_r);
    const auto &in = *built.inputs;
    const auto sigmas = to_sigmas(in, built.plan, built.budget);
    const auto real_parts = portfolio_variances(sigmas, *built.real);
    const double v_real = std::accumulate(real_parts.begin(), real_parts.end(), 0.0);
    const double v_round = estimator_variance(in, built.plan).total;
    const double v_equal = estimator_variance(in, equal).total;
    json report{{"experiment", config.experiment},
                {"mode", mode},
                {"sigma_source", config.sigma_source},
                {"budget", built.budget},
                {"real_cost", built.real->cost()},
                {"rounded_cost", built.plan.cost()},
                {"rounding_bound", rounding_bound(*built.real)},
                {"variance_real", cents(v_real)},
                {"variance_rounded", cents(v_round)},
                {"variance_equal", cents(v_equal)},
                {"equal_realisations", equal_r},
                {"reduction", 1.0 - v_round / v_equal},
                {"mean_realisations", mean_counts(built.plan)}};
    if (config.evaluate_reference) {
        report["reference_evaluation"] = reference_evaluation(pop, config, built.plan, threads, log);
    }
    out.write("population.csv", io::population_csv(pop));
    out.write("plan.csv", io::plan_csv(pop, built.plan, &*built.real));
    out.write_json("allocation.json", report);
    fmt::print(log, "Var(mu_hat): optimized {} vs equal {} ({:.1f}% lower)\n", io::money(v_round),
               io::money(v_equal), 100.0 * (1.0 - v_round / v_equal));
    return 0;
}

namespace {

json solution_json(const ConstrainedProblem &problem, const ActiveSetSolution &sol) {
    json active = json::array();
    for (std::size_t j = 0; j < sol.active.size(); ++j) {
        if (sol.active[j]) {
            active.push_back(j);
        }
    }
    json caps = json::array();
    for (double c : problem.caps) {
        caps.push_back(std::isinf(c) ? json(nullptr) : json(c));
    }
    const auto slater = check_slater(problem);
    return {{"active", active},
            {"iterations", sol.iterations},
            {"alpha_trace", sol.alpha_trace},
            {"lambda", sol.lambda},
            {"delta", sol.delta},
            {"variances", sol.variances},
            {"caps", caps},
            {"objective", sol.objective},
            {"unspent_budget", sol.unspent},
            {"slater_margin", slater.margin},
            {"kkt", kkt_json(kkt_report(problem, sol))},
            {"plan", [&] {
                 json p = json::array();
                 for (const auto &c : sol.plan.portfolios) {
                     p.push_back({{"independent", c.independent}, {"block", c.block}, {"block_size", c.block_size}});
                 }
                 return p;
             }()}};
}

} // namespace

int cmd_protect(const ExperimentConfig &config, std::ostream &log) {
    const int threads = resolve_threads(config.threads);
    OutputSet out(config, "protect");
    if (!config.problem_file.empty()) {
        const auto problem = io::problem_from_json(io::read_text(config.problem_file));
        const auto sol = active_set_solve(problem);
        out.write_json("solution.json", solution_json(problem, sol));
        fmt::print(log, "solved {} portfolios in {} passes\n", problem.size(), sol.iterations);
        return 0;
    }
    if (config.caps.empty()) {
        throw ValidationError("protect needs plan.caps (or plan.problem_file)");
    }
    const auto pop = load_population(config, config.seed, threads);
    std::optional<Emulator> em;
    if (config.sigma_source == "emulator") {
        em = load_emulator(config);
    }
    const auto built = build_plan(pop, config, "constrained", config.sigma_source, derive_seed(config.seed, 4),
                                  em ? &*em : nullptr, threads);
    const auto &problem = *built.problem;
    const auto &sol = *built.solution;
    const auto unconstrained = optimal_allocation(problem.allocation);
    const auto v_free = portfolio_variances(problem, unconstrained);
    const auto v_round = portfolio_variances(problem, to_real(built.plan));
    const auto counts = mean_counts(built.plan);

    const auto sim = run_plan(pop, built.plan, config.settings(),
                              {{derive_seed(config.seed, 2), Stream::estimation}, threads, MonthlyDetail::none});
    const auto mu = estimate_mu(sim);
    json portfolios = json::array();
    for (std::size_t j = 0; j < problem.size(); ++j) {
        json p{{"size", pop.portfolios[j].size()},
               {"block_size", pop.portfolios[j].dependent_ids.size()},
               {"cap", std::isinf(problem.caps[j]) ? json(nullptr) : json(problem.caps[j])},
               {"unconstrained_variance", cents(v_free[j])},
               {"unconstrained_sd", cents(std::sqrt(v_free[j]))},
               {"variance", cents(sol.variances[j])},
               {"sd", cents(std::sqrt(sol.variances[j]))},
               {"rounded_variance", cents(v_round[j])},
               {"mean_realisations", counts[j]},
               {"mu", cents(mu.portfolio[j])}};
        portfolios.push_back(p);
    }
    json report{{"experiment", config.experiment},
                {"sigma_source", config.sigma_source},
                {"budget", built.budget},
                {"rounded_cost", built.plan.cost()},
                {"mu", cents(mu.total)},
                {"portfolios", portfolios},
                {"solution", solution_json(problem, sol)}};
    if (all_at_least_two(built.plan)) {
        report["estimated_portfolio_variance"] = vector_cents(estimator_variance(sample_variances(sim), built.plan).portfolio);
    }
    out.write("population.csv", io::population_csv(pop));
    out.write("plan.csv", io::plan_csv(pop, built.plan, &*built.real));
    out.write_json("protect.json", report);
    for (std::size_t j = 0; j < problem.size(); ++j) {
        fmt::print(log, "portfolio {}: sd {} -> {} (mean realisations {:.1f})\n", j + 1,
                   io::money(std::sqrt(v_free[j])), io::money(std::sqrt(sol.variances[j])), counts[j]);
    }
    return 0;
}

int cmd_interval(const ExperimentConfig &config, std::ostream &log) {
    const int threads = resolve_threads(config.threads);
    OutputSet out(config, "interval");
    const auto pop = load_population(config, config.seed, threads);
    std::optional<Emulator> em;
    if (config.interval_method == "M2" || (config.plan_mode != "equal" && config.sigma_source == "emulator")) {
        em = load_emulator(config);
    }
    const auto pilot_seed = derive_seed(config.seed, 4);
    const auto built = build_plan(pop, config, config.plan_mode, config.sigma_source, pilot_seed,
                                  em ? &*em : nullptr, threads);
    const auto detail = config.interval_method == "M1" ? MonthlyDetail::moments : MonthlyDetail::none;
    const auto sim = run_plan(pop, built.plan, config.settings(),
                              {{derive_seed(config.seed, 2), Stream::estimation}, threads, detail});
    const auto mu = estimate_mu(sim);
    VarianceInputs inputs;
    if (config.interval_method == "M1") {
        inputs = sample_variances(sim);
    } else {
        inputs = unit_variances(pop, config, "emulator", pilot_seed, &*em, threads);
        const auto sampled = sample_variances(sim);
        for (std::size_t j = 0; j < inputs.portfolios.size(); ++j) {
            if (built.plan.portfolios[j].block_size > 0 && built.plan.portfolios[j].block >= 2) {
                inputs.portfolios[j].block = sampled.portfolios[j].block;
            }
        }
    }
    const auto pi = prediction_interval(mu.total, inputs, built.plan, config.coverage_p, &pop);
    json report{{"experiment", config.experiment},
                {"method", config.interval_method},
                {"plan_mode", config.plan_mode},
                {"cost", built.plan.cost()},
                {"interval", interval_json(pi)}};
    out.write("population.csv", io::population_csv(pop));
    out.write("plan.csv", io::plan_csv(pop, built.plan, built.real ? &*built.real : nullptr));
    if (config.interval_method == "M1") {
        const auto bands = monthly_bands(sim, built.plan, config.coverage_p);
        out.write("curve.csv", io::curve_csv(estimate_monthly_mu(sim), &bands));
    }
    out.write_json("interval.json", report);
    fmt::print(log, "{:.0f}% interval: {} +- {}\n", 100 * config.coverage_p, io::money(pi.center),
               io::money(pi.half_width));
    return 0;
}

int cmd_train_emulator(const ExperimentConfig &config, std::ostream &log) {
    const int threads = resolve_threads(config.threads);
    OutputSet out(config, "train-emulator");
    const auto design = sliced_lhd(config.points_per_slice, config.seed, {config.exchange_iterations});
    TrainingOptions topt;
    topt.realisations = config.training_realisations;
    topt.horizon = config.horizon;
    topt.threads = threads;
    topt.covariates = config.covariates();
    fmt::print(log, "simulating {} design points x {} realisations\n", design.points.size(), topt.realisations);
    const auto data = generate_training_data(design, config.seed, topt);
    std::size_t dropped = 0;
    for (auto d : data.dropped) {
        dropped += d;
    }
    fmt::print(log, "dropped {} zero-variance points; fitting\n", dropped);
    EmulatorTrainOptions eopt;
    eopt.mode = config.emulator_mode;
    eopt.threads = threads;
    auto em = train_emulator(data, eopt, topt.covariates, config.horizon);
    em.set_point(config.point_prediction);
    const auto test = random_design(config.test_points_per_slice, config.seed);
    const auto metrics = validate_emulator(em, test, config.test_realisations, config.seed, threads);
    out.write("design.csv", io::design_csv(design));
    out.write("training.csv", io::training_csv(data));
    out.write("emulator.json", emulator_to_json(em));
    auto m = metrics_json(metrics, em);
    m["training_points"] = data.observations.size();
    m["training_dropped"] = dropped;
    out.write_json("metrics.json", m);
    fmt::print(log, "test correlation (sd) {:.3f}, log-RMSE {:.3f}, coverage {:.3f}\n", metrics.pooled.correlation,
               metrics.pooled.log_rmse, metrics.pooled.coverage);
    return 0;
}

int cmd_validate_emulator(const ExperimentConfig &config, std::ostream &log) {
    const int threads = resolve_threads(config.threads);
    OutputSet out(config, "validate-emulator");
    const auto em = load_emulator(config);
    const auto test = random_design(config.test_points_per_slice, config.seed);
    const auto metrics = validate_emulator(em, test, config.test_realisations, config.seed, threads);
    out.write_json("metrics.json", metrics_json(metrics, em));
    fmt::print(log, "test correlation (sd) {:.3f}, log-RMSE {:.3f}, coverage {:.3f}\n", metrics.pooled.correlation,
               metrics.pooled.log_rmse, metrics.pooled.coverage);
    return 0;
}

int cmd_oracle_check(const ExperimentConfig &config, std::ostream &log) {
    const int threads = resolve_threads(config.threads);
    OutputSet out(config, "oracle-check");
    const std::size_t n = config.oracle_instances;
    std::vector<OracleComparison> results(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const auto p = random_constrained_instance(config.seed, static_cast<std::uint32_t>(i),
                                                   config.oracle_min_portfolios, config.oracle_max_portfolios);
        results[i] = compare_with_oracle(p);
    });
    std::size_t agree = 0;
    std::size_t with_constraints = 0;
    std::size_t alpha_ok = 0;
    std::size_t last_met = 0;
    double max_obj = 0.0;
    double max_stat = 0.0;
    double max_primal = 0.0;
    double max_comp = 0.0;
    double min_delta = std::numeric_limits<double>::infinity();
    for (const auto &r : results) {
        const bool ok = r.oracle_found && r.same_active && r.objective_rel_diff <= 1e-8;
        agree += ok ? 1 : 0;
        with_constraints += r.constraints_added ? 1 : 0;
        alpha_ok += (!r.constraints_added || r.alpha_decreasing) ? 1 : 0;
        last_met += r.last_constraint_met ? 1 : 0;
        max_obj = std::max(max_obj, r.objective_rel_diff);
        max_stat = std::max(max_stat, r.kkt.stationarity);
        max_primal = std::max(max_primal, r.kkt.primal);
        max_comp = std::max(max_comp, r.kkt.complementarity);
        min_delta = std::min(min_delta, r.kkt.min_delta);
    }
    const bool pass = agree == n && alpha_ok == n && last_met == n && max_stat < 1e-8 && max_primal < 1e-8 &&
                      max_comp < 1e-8 && min_delta >= -1e-12;
    json report{{"instances", n},
                {"agree_with_oracle", agree},
                {"instances_with_active_constraints", with_constraints},
                {"alpha_strictly_decreasing", alpha_ok},
                {"last_constraint_met", last_met},
                {"max_objective_rel_diff", max_obj},
                {"max_stationarity", max_stat},
                {"max_primal", max_primal},
                {"max_complementarity", max_comp},
                {"min_delta", min_delta},
                {"pass", pass}};
    out.write_json("oracle.json", report);
    fmt::print(log, "{} / {} instances agree with the brute-force oracle ({} with active constraints)\n", agree, n,
               with_constraints);
    return pass ? 0 : 1;
}

} // namespace nplmc::app
