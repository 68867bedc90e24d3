#pragma once

#include <exception>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "largesol/config.hpp"
#include "largesol/grid.hpp"
#include "largesol/ladders.hpp"

namespace largesol {

enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitPrecondition = 2, kExitConvergence = 3 };

struct RunOutcome {
    nlohmann::json summary = nlohmann::json::object();
    std::optional<LadderTrace> trace;
    std::optional<Field> field;
    std::optional<std::string> profile_csv;
    int exit_code = kExitOk;
};

// Performs the configured computation in memory.
RunOutcome execute(const ExperimentConfig& cfg);

// execute() plus artifacts in cfg.output_dir: summary.json always, trace.csv
// and field.dat when the mode produces them, profile.csv for the oracle.
int run(const ExperimentConfig& cfg, std::ostream& err);

int exit_code_for(const std::exception& e);

// JSON-safe number: infinities become the strings "inf" / "-inf".
nlohmann::json json_number(double v);

}  // namespace largesol
