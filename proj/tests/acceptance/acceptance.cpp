// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any fails.
//
//   nplmc_acceptance --cli <path to nplmc> --work <scratch dir> [--only 1,4,...]

#include "nplmc/allocator.hpp"
#include "nplmc/app.hpp"
#include "nplmc/constrained.hpp"
#include "nplmc/emulator.hpp"
#include "nplmc/estimators.hpp"
#include "nplmc/gp.hpp"
#include "nplmc/instances.hpp"
#include "nplmc/io.hpp"
#include "nplmc/parallel.hpp"
#include "nplmc/simulator.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace nplmc;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Context {
    fs::path cli;
    fs::path work;
    int threads = 0;
};

constexpr std::uint64_t kSeed = 20240601;

json read_json(const fs::path &p) { return json::parse(io::read_text(p)); }

int run_app(const std::string &command, app::ExperimentConfig c) {
    std::ostringstream log;
    return app::run_command(command, c, log);
}

fs::path emulator_path(const Context &ctx) { return ctx.work / "emulator" / "emulator.json"; }

/// Trains the emulator used by criteria 1 and 7 once.
void ensure_emulator(const Context &ctx) {
    if (fs::exists(emulator_path(ctx))) {
        return;
    }
    app::ExperimentConfig c;
    c.experiment = "acceptance-emulator";
    c.seed = kSeed;
    c.threads = ctx.threads;
    c.out = (ctx.work / "emulator").string();
    run_app("train-emulator", c);
}

// 1. Coverage and relative uncertainty of the prediction intervals.
Outcome coverage(const Context &ctx) {
    ensure_emulator(ctx);
    app::ExperimentConfig c;
    c.experiment = "acceptance-coverage";
    c.seed = kSeed;
    c.threads = ctx.threads;
    c.out = (ctx.work / "coverage").string();
    c.emulator_file = emulator_path(ctx).string();
    c.repetitions = 1000;
    c.sizes = {100, 250, 1000};
    c.methods = {"equal-M1", "optimized-M2"};
    run_app("coverage-study", c);
    const auto table = read_json(fs::path(c.out) / "coverage.json")["setups"];

    const std::array<double, 3> published_free{0.124, 0.0622, 0.0342};
    bool ok = true;
    std::string detail;
    std::array<std::array<double, 3>, 2> rel{};
    for (const auto &row : table) {
        const auto n = row["n"].get<std::size_t>();
        const std::size_t k = n == 100 ? 0 : n == 250 ? 1 : 2;
        const std::size_t m = row["plan"] == "equal" ? 0 : 1;
        const double cov = row["coverage"].get<double>();
        rel[m][k] = row["relative_uncertainty"].get<double>();
        ok = ok && std::abs(cov - 0.95) <= 0.02;
        if (m == 0) {
            ok = ok && std::abs(rel[m][k] / published_free[k] - 1.0) <= 0.25;
        }
        detail += fmt::format(" {}={:.1f}%/{:.2f}%", row["setup"].get<std::string>(), 100 * cov, 100 * rel[m][k]);
    }
    for (const auto &r : rel) {
        ok = ok && r[0] > r[1] && r[1] > r[2];
    }
    return {ok, "coverage/relative uncertainty" + detail};
}

// 2. Variance reduction of the optimized plan on a fresh population.
Outcome reduction(const Context &ctx) {
    const auto pop = init_population({1000, {1.0}, {}}, derive_seed(kSeed, 2));
    const SimulationSettings settings;
    // Plan from one 5000-realisation pilot, judged with an independent one.
    const auto pilot = reference_variances(pop, settings, 5000, derive_seed(kSeed, 21), ctx.threads);
    const auto judge = reference_variances(pop, settings, 5000, derive_seed(kSeed, 22), ctx.threads);
    const auto equal = equal_plan(pop, 30);
    const auto optimized = round_plan(optimal_allocation(to_sigmas(pilot, equal, equal.cost())));
    const double v_equal = estimator_variance(judge, equal).total;
    const double v_opt = estimator_variance(judge, optimized).total;
    const double r = 1.0 - v_opt / v_equal;
    return {r >= 0.20 && r <= 0.45,
            fmt::format("Var(mu_hat) equal {:.4g}, optimized {:.4g}, reduction {:.1f}% (band 20-45%), "
                        "block r = {}, cost {:.0f} vs {:.0f}",
                        v_equal, v_opt, 100 * r, optimized.portfolios[0].block, optimized.cost(), equal.cost())};
}

// 3. Active-set solver against the exhaustive oracle.
Outcome active_set(const Context &) {
    const auto start = std::chrono::steady_clock::now();
    int agree = 0, kkt_ok = 0, alpha_ok = 0, added = 0;
    double worst_obj = 0.0, worst_kkt = 0.0, min_delta = 0.0;
    const int n = 200;
    for (int k = 0; k < n; ++k) {
        const auto p = random_constrained_instance(derive_seed(kSeed, 3), static_cast<std::uint32_t>(k), 2, 6);
        const auto c = compare_with_oracle(p);
        const double kkt = std::max({c.kkt.stationarity, c.kkt.primal, c.kkt.complementarity});
        agree += c.oracle_found && c.same_active && c.objective_rel_diff <= 1e-8;
        kkt_ok += kkt < 1e-8 && c.kkt.min_delta >= -1e-12;
        added += c.constraints_added;
        alpha_ok += !c.constraints_added || c.alpha_decreasing;
        worst_obj = std::max(worst_obj, c.objective_rel_diff);
        worst_kkt = std::max(worst_kkt, kkt);
        min_delta = std::min(min_delta, c.kkt.min_delta);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {agree == n && kkt_ok == n && alpha_ok == n && secs < 60,
            fmt::format("{}/{} match oracle (worst objective diff {:.1e}), KKT ok {}/{} (worst {:.1e}, min delta "
                        "{:.1e}), alpha decreasing {}/{} ({} with constraints added), {:.2f}s",
                        agree, n, worst_obj, kkt_ok, n, worst_kkt, min_delta, alpha_ok, n, added, secs)};
}

// 4. Portfolio protection with caps (1000^2, 50^2) on a 99/1 split.
Outcome protection(const Context &ctx) {
    const std::vector<double> caps{1000.0 * 1000.0, 50.0 * 50.0};
    const int populations = 40;
    bool caps_ok = true;
    double worst_real = 0.0, worst_round = 0.0;
    std::vector<double> factors;
    double sum1 = 0.0, sum2 = 0.0;
    for (int s = 0; s < populations; ++s) {
        const auto pop = init_population({1000, {0.99, 0.01}, {}}, derive_seed(kSeed, 400 + s));
        const auto sigma = reference_variances(pop, {}, 5000, derive_seed(kSeed, 500 + s), ctx.threads);
        ConstrainedProblem problem{to_sigmas(sigma, equal_plan(pop, 1), 30.0 * 1000), caps};
        const auto sol = active_set_solve(problem);
        const auto rounded = round_plan(sol.plan);
        const auto v_round = portfolio_variances(problem, to_real(rounded));
        for (std::size_t j = 0; j < 2; ++j) {
            const double real_ratio = sol.variances[j] / caps[j];
            const double round_ratio = v_round[j] / caps[j];
            worst_real = std::max(worst_real, real_ratio);
            worst_round = std::max(worst_round, round_ratio);
            caps_ok = caps_ok && real_ratio <= 1.0 + 1e-12 && round_ratio <= 1.1;
        }
        std::array<double, 2> mean{};
        for (std::size_t j = 0; j < 2; ++j) {
            const auto &c = rounded.portfolios[j];
            double total = static_cast<double>(c.block) * static_cast<double>(c.block_size);
            for (auto r : c.independent) {
                total += r;
            }
            mean[j] = total / static_cast<double>(pop.portfolios[j].size());
        }
        sum1 += mean[0];
        sum2 += mean[1];
        factors.push_back(mean[1] / mean[0]);
    }
    auto sorted = factors;
    std::sort(sorted.begin(), sorted.end());
    const double median = 0.5 * (sorted[populations / 2 - 1] + sorted[populations / 2]);
    const auto at_least_two = std::count_if(factors.begin(), factors.end(), [](double f) { return f >= 2.0; });
    return {caps_ok && median >= 2.0,
            fmt::format("caps held on {} populations (worst Var/V real {:.6f}, rounded {:.4f}); mean realisations "
                        "P2 {:.1f} vs P1 {:.1f}, median factor {:.2f}, factor >= 2 in {}/{} populations",
                        populations, worst_real, worst_round, sum2 / populations, sum1 / populations, median,
                        at_least_two, populations)};
}

// 5. Closed-form allocation against random feasible plans.
Outcome allocation(const Context &) {
    std::mt19937_64 gen(derive_seed(kSeed, 5));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::gamma_distribution<double> g(1.0, 1.0);
    int beaten = 0;
    double worst_kkt = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        std::vector<double> sigma(5);
        for (auto &s : sigma) {
            s = std::exp(6.0 * u(gen) - 1.0);
        }
        const double budget = 50.0 + 2000.0 * u(gen);
        const AllocationInputs in{{{sigma, 0.0, 0}}, budget};
        const auto plan = optimal_allocation(in);
        const auto &r = plan.portfolios[0].independent;
        double v = 0.0, lo = INFINITY, hi = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            v += sigma[i] * sigma[i] / r[i];
            const double ratio = sigma[i] * sigma[i] / (r[i] * r[i]);
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
        worst_kkt = std::max(worst_kkt, hi / lo - 1.0);
        bool best = true;
        for (int k = 0; k < 10000; ++k) {
            std::array<double, 5> w{};
            double total = 0.0;
            for (auto &x : w) {
                x = g(gen);
                total += x;
            }
            double alt = 0.0;
            for (std::size_t i = 0; i < 5; ++i) {
                alt += sigma[i] * sigma[i] / (budget * w[i] / total);
            }
            best = best && v <= alt * (1.0 + 1e-12);
        }
        beaten += !best;
    }
    return {beaten == 0 && worst_kkt < 1e-9,
            fmt::format("closed form never beaten on {}/100 instances x 10^4 Dirichlet plans; max relative spread "
                        "of sigma^2/R^2 {:.1e}",
                        100 - beaten, worst_kkt)};
}

// 6. Var(log v_hat) ~ (kappa - 1) / K at low-kurtosis points.
Outcome noise_law(const Context &ctx) {
    struct Point {
        double b, c;
        Segment s;
        bool y;
    };
    const std::array<Point, 5> points{{{0.5, 0.5, Segment::one, false},
                                       {0.8, 0.7, Segment::one, true},
                                       {0.5, 0.2, Segment::two, false},
                                       {0.5, 0.9, Segment::three, false},
                                       {0.2, 0.7, Segment::three, true}}};
    const std::uint32_t K = 1000, reps = 500;
    bool ok = true;
    std::string detail;
    for (std::size_t p = 0; p < points.size(); ++p) {
        const auto &pt = points[p];
        const Account a{static_cast<AccountId>(p), balance_quantile(pt.b), credit_quantile(pt.c), pt.s, false, pt.y};
        std::vector<double> ref(1000000);
        simulate_independent_batch(a, 84, {derive_seed(kSeed, 6), Stream::reference}, 0, ref);
        const double kappa = sample_moments(ref).kurtosis;
        std::vector<double> logs(reps);
        parallel_for(reps, ctx.threads, [&](std::size_t r) {
            std::vector<double> t(K);
            simulate_independent_batch(a, 84, {derive_seed(kSeed, 6), Stream::training},
                                       static_cast<std::uint32_t>(r * K), t);
            logs[r] = std::log(sample_moments(t, false).variance);
        });
        const double observed = sample_moments(logs, false).variance;
        const double predicted = (kappa - 1.0) / K;
        const double rel = observed / predicted - 1.0;
        ok = ok && std::abs(rel) <= 0.25;
        detail += fmt::format(" [kappa {:.2f}: {:.2e} vs {:.2e}, {:+.0f}%]", kappa, observed, predicted, 100 * rel);
    }
    return {ok, "Var(log v_hat) vs (kappa-1)/K:" + detail};
}

double matern(double r, double tau2) {
    const double s = std::sqrt(5.0) * r;
    return tau2 * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

/// Largest deviation of GpModel from a cofactor-inverse solution on 3 points.
double three_point_error() {
    const std::vector<double> x{0.0, 0.0, 0.4, 0.7, 0.9, 0.2};
    const std::vector<double> y{-1.0, 0.5, 2.0};
    const std::vector<double> noise{0.05, 0.0, 0.1};
    const std::vector<double> ls{0.5, 0.3};
    const double tau2 = 0.8, jitter = 1e-8;
    const GpModel gp(2, x, y, noise, {ls, tau2, 0.0}, jitter);
    const auto dist = [&](const double *a, const double *b) {
        return std::hypot((a[0] - b[0]) / ls[0], (a[1] - b[1]) / ls[1]);
    };
    std::array<std::array<double, 3>, 3> K{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            K[i][j] = matern(dist(&x[2 * i], &x[2 * j]), tau2) + (i == j ? noise[i] + jitter : 0.0);
        }
    }
    const double det = K[0][0] * (K[1][1] * K[2][2] - K[1][2] * K[2][1]) -
                       K[0][1] * (K[1][0] * K[2][2] - K[1][2] * K[2][0]) +
                       K[0][2] * (K[1][0] * K[2][1] - K[1][1] * K[2][0]);
    std::array<std::array<double, 3>, 3> inv{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const int r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
            inv[i][j] = (K[r0][c0] * K[r1][c1] - K[r0][c1] * K[r1][c0]) / det;
        }
    }
    double a = 0.0, b = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            a += inv[i][j];
            b += inv[i][j] * y[j];
        }
    }
    const double beta = b / a;
    double err = std::abs(gp.hyper().mean - beta);
    for (const auto &q : std::vector<std::array<double, 2>>{{0.1, 0.1}, {0.4, 0.7}, {1.0, 0.0}, {0.6, 0.5}}) {
        std::array<double, 3> k{};
        for (int i = 0; i < 3; ++i) {
            k[i] = matern(dist(q.data(), &x[2 * i]), tau2);
        }
        double mean = beta, var = tau2;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                mean += k[i] * inv[i][j] * (y[j] - beta);
                var -= k[i] * inv[i][j] * k[j];
            }
        }
        const auto p = gp.predict(q.data());
        err = std::max({err, std::abs(p.mean - mean), std::abs(p.variance - var)});
    }
    return err;
}

// 7. Emulator quality on an independent random test design.
Outcome emulator_quality(const Context &ctx) {
    ensure_emulator(ctx);
    const auto em = emulator_from_json(io::read_text(emulator_path(ctx)));
    const auto m = validate_emulator(em, random_design(100, derive_seed(kSeed, 71)), 1000, derive_seed(kSeed, 72),
                                     ctx.threads);
    const auto pop = init_population({10000, {1.0}, {}}, derive_seed(kSeed, 73));
    std::size_t positive = 0;
    for (const auto &a : pop.accounts) {
        const double v = em.predict(a).variance;
        positive += v > 0.0 && std::isfinite(v);
    }
    const double err = three_point_error();
    std::string groups;
    for (std::size_t g = 0; g < m.groups.size(); ++g) {
        groups += fmt::format(" s{} {:.3f}", g + 1, m.groups[g].correlation);
    }
    return {m.pooled.correlation >= 0.9 && positive == pop.size() && err < 1e-10,
            fmt::format("pooled sd correlation {:.3f} (per segment{}), log-RMSE {:.3f}, interval coverage {:.3f}; "
                        "{}/{} predictions positive; 3-point GP error {:.1e}",
                        m.pooled.correlation, groups, m.pooled.log_rmse, m.pooled.coverage, positive, pop.size(), err)};
}

// 8. Every subcommand reruns bitwise-identically at 1 and 8 threads.
Outcome determinism(const Context &ctx) {
    const fs::path dir = ctx.work / "determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto write_config = [&](const std::string &name, const json &doc) {
        const auto p = dir / (name + ".json");
        io::write_text(p, doc.dump(1));
        return p;
    };
    const auto em = dir / "train-emulator-1" / "emulator.json";
    const std::vector<std::pair<std::string, json>> runs{
        {"train-emulator", {{"emulator", {{"points_per_slice", 15}, {"K", 300}, {"test_points_per_slice", 10},
                                          {"test_K", 300}}}}},
        {"simulate", {{"population", {{"n", 300}, {"portfolio_probs", {0.9, 0.1}}}},
                      {"simulation", {{"monthly", "paths"}}}}},
        {"allocate", {{"population", {{"n", 300}}}, {"plan", {{"mode", "optimized"}}}}},
        {"protect", {{"population", {{"n", 300}, {"portfolio_probs", {0.9, 0.1}}}},
                     {"plan", {{"caps", {4.0e5, 1.0e4}}}}}},
        {"interval", {{"population", {{"n", 300}}},
                      {"plan", {{"mode", "optimized"}, {"sigma_source", "emulator"}}},
                      {"interval", {{"method", "M2"}}},
                      {"emulator", {{"file", em.string()}}}}},
        {"validate-emulator", {{"emulator", {{"file", em.string()}, {"test_points_per_slice", 10},
                                             {"test_K", 300}}}}},
        {"coverage-study", {{"emulator", {{"file", em.string()}}},
                            {"coverage", {{"repetitions", 40}, {"sizes", {60}}, {"checkpoint_every", 15}}}}},
        {"oracle-check", {{"oracle", {{"instances", 40}}}}},
    };
    bool ok = true;
    std::size_t files = 0;
    std::vector<std::string> bad;
    for (const auto &[command, doc] : runs) {
        const auto config = write_config(command, doc);
        std::array<fs::path, 3> outs;
        const std::array<int, 3> threads{1, 1, 8};
        for (std::size_t k = 0; k < 3; ++k) {
            outs[k] = dir / fmt::format("{}-{}", command, k);
            const auto cmd = fmt::format("\"{}\" {} --config \"{}\" --seed 99 --threads {} --out \"{}\" > \"{}.log\" 2>&1",
                                         ctx.cli.string(), command, config.string(), threads[k], outs[k].string(),
                                         outs[k].string());
            if (std::system(cmd.c_str()) != 0) {
                ok = false;
                bad.push_back(command + " exit");
            }
        }
        std::set<std::string> names;
        for (const auto &e : fs::directory_iterator(outs[0])) {
            names.insert(e.path().filename().string());
        }
        if (names.empty()) {
            ok = false;
            bad.push_back(command + " wrote nothing");
        }
        for (std::size_t k = 1; k < 3; ++k) {
            std::set<std::string> other;
            for (const auto &e : fs::directory_iterator(outs[k])) {
                other.insert(e.path().filename().string());
            }
            if (other != names) {
                ok = false;
                bad.push_back(command + " file set");
            }
        }
        for (const auto &name : names) {
            const auto ref = io::read_text(outs[0] / name);
            for (std::size_t k = 1; k < 3; ++k) {
                if (!fs::exists(outs[k] / name) || io::read_text(outs[k] / name) != ref) {
                    ok = false;
                    bad.push_back(command + "/" + name);
                }
            }
            ++files;
        }
    }
    std::string detail = fmt::format("{} subcommands, {} output files compared across runs at 1, 1 and 8 threads",
                                     runs.size(), files);
    if (!bad.empty()) {
        detail += "; differing:";
        for (const auto &b : bad) {
            detail += " " + b;
        }
    }
    return {ok, detail};
}

} // namespace

int main(int argc, char **argv) {
    Context ctx;
    ctx.work = fs::temp_directory_path() / "nplmc_acceptance";
    std::set<int> only;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        const std::string value = argv[i + 1];
        if (flag == "--cli") {
            ctx.cli = value;
        } else if (flag == "--work") {
            ctx.work = value;
        } else if (flag == "--threads") {
            ctx.threads = std::stoi(value);
        } else if (flag == "--only") {
            std::stringstream ss(value);
            for (std::string item; std::getline(ss, item, ',');) {
                only.insert(std::stoi(item));
            }
        } else {
            std::cerr << "unknown flag " << flag << "\n";
            return 2;
        }
    }
    if (ctx.cli.empty()) {
        ctx.cli = fs::path(argv[0]).parent_path().parent_path() / "nplmc";
    }
    fs::create_directories(ctx.work);

    const std::vector<std::pair<std::string, std::function<Outcome(const Context &)>>> criteria{
        {"coverage", coverage},           {"variance-reduction", reduction}, {"active-set", active_set},
        {"protection", protection},       {"allocation", allocation},        {"noise-law", noise_law},
        {"emulator", emulator_quality},   {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.count(id)) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second(ctx);
        } catch (const std::exception &e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::cout << fmt::format("{} {} {}: {} ({:.1f}s)", o.pass ? "PASS" : "FAIL", id, criteria[k].first, o.detail,
                                 secs)
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
