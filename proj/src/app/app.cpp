#include "common.hpp"

#include "nplmc/error.hpp"

#include <functional>
#include <map>

namespace nplmc::app {

namespace {

const std::map<std::string, std::function<int(const ExperimentConfig &, std::ostream &)>> &commands() {
    static const std::map<std::string, std::function<int(const ExperimentConfig &, std::ostream &)>> table{
        {"simulate", cmd_simulate},
        {"allocate", cmd_allocate},
        {"protect", cmd_protect},
        {"interval", cmd_interval},
        {"coverage-study", cmd_coverage_study},
        {"train-emulator", cmd_train_emulator},
        {"validate-emulator", cmd_validate_emulator},
        {"oracle-check", cmd_oracle_check},
    };
    return table;
}

} // namespace

const std::vector<std::string> &command_names() {
    static const std::vector<std::string> names{"simulate",       "allocate",       "protect",
                                                "interval",       "coverage-study", "train-emulator",
                                                "validate-emulator", "oracle-check"};
    return names;
}

int run_command(const std::string &command, const ExperimentConfig &config, std::ostream &log) {
    const auto it = commands().find(command);
    if (it == commands().end()) {
        throw ValidationError("unknown command " + command);
    }
    ExperimentConfig c = config;
    if (c.experiment.empty()) {
        c.experiment = command;
    }
    return it->second(c, log);
}

} // namespace nplmc::app
