#include "nplmc/app.hpp"
#include "nplmc/error.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

int main(int argc, char **argv) {
    using nplmc::app::ExperimentConfig;
    CLI::App cli{"Monte Carlo forecasting of portfolio collections with optimal realisation allocation"};
    cli.set_version_flag("--version", nplmc::app::kVersion);
    cli.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out;
    const std::map<std::string, std::string> about{
        {"simulate", "run a realisation plan and write totals, the collections curve and a summary"},
        {"allocate", "optimal realisation numbers under the budget, compared with the equal plan"},
        {"protect", "allocation with per-portfolio variance caps (active-set solver)"},
        {"interval", "prediction interval for total collections (M1 sample or M2 emulator variances)"},
        {"coverage-study", "repeat the whole procedure to measure interval coverage and length"},
        {"train-emulator", "sliced Latin hypercube design, training simulations and GP fit"},
        {"validate-emulator", "score an emulator on an independent random test design"},
        {"oracle-check", "compare the active-set solver with exhaustive enumeration"},
    };
    for (const auto &name : nplmc::app::command_names()) {
        auto *sub = cli.add_subcommand(name, about.at(name));
        sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "master seed (overrides the config)");
        sub->add_option("--threads", threads, "worker threads, 0 = all cores (overrides the config)");
        sub->add_option("--out", out, "output directory (overrides the config)");
    }
    CLI11_PARSE(cli, argc, argv);
    const std::string command = cli.get_subcommands().front()->get_name();

    try {
        ExperimentConfig config;
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            std::stringstream ss;
            ss << f.rdbuf();
            config = nplmc::app::apply_config_json(ss.str());
        }
        if (seed) {
            config.seed = *seed;
        }
        if (threads) {
            config.threads = *threads;
        }
        if (out) {
            config.out = *out;
        }
        config = nplmc::app::apply_config_json("{}", config);
        return nplmc::app::run_command(command, config, std::cerr);
    } catch (const nplmc::InfeasibleError &e) {
        std::cerr << fmt::format("error: {} (Slater margin {:.6g})\n", e.what(), e.margin());
        return 3;
    } catch (const nplmc::Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
