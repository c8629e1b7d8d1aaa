#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "sandwich/scenario.hpp"

namespace sandwich {

enum ExitCode : int { kExitOk = 0, kExitCriterion = 1, kExitConfig = 2, kExitSolver = 3 };

struct RunContext {
    std::filesystem::path out;  // output directory, created on demand
    bool quiet = false;
    std::ostream* log = nullptr;  // progress and summaries; nullptr is silent
};

// Each command writes its files plus manifest.json into ctx.out and
// returns an exit code.  Exceptions propagate; run_command maps them.
int cmd_validate(const ScenarioConfig& c, const RunContext& ctx);
int cmd_simulate(const ScenarioConfig& c, const RunContext& ctx);
int cmd_decay_report(const ScenarioConfig& c, const RunContext& ctx);
int cmd_hum(const ScenarioConfig& c, const RunContext& ctx);
int cmd_observability(const ScenarioConfig& c, const RunContext& ctx);
int cmd_convergence(const ScenarioConfig& c, const RunContext& ctx);

// Dispatch by name; ConfigError and a wrong variant give 2, solver and CG
// failures 3, infeasible rates and violated hypotheses 1.
int run_command(const std::string& name, const ScenarioConfig& c, const RunContext& ctx);

}  // namespace sandwich
