#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sandwich/commands.hpp"
#include "sandwich/scenario.hpp"

namespace {

// Precedence: --out, then SANDWICH_OUTPUT_DIR, then run.output_dir.
std::filesystem::path output_dir(const std::string& flag, const sandwich::ScenarioConfig& c) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("SANDWICH_OUTPUT_DIR"); env && *env) return env;
    return c.output_dir;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sandwich beam boundary stabilization and null control"};
    app.require_subcommand(1);
    std::string config, out;
    long long seed = -1;
    int stride = 0;
    bool quiet = false;
    app.add_option("--config", config, "scenario file (INI)")->required();
    app.add_option("--out", out, "output directory");
    app.add_option("--seed", seed, "seed for random presets and samples")->check(CLI::NonNegativeNumber);
    app.add_option("--stride", stride, "keep every K-th step in trajectory output")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", quiet, "suppress progress output");
    for (const char* name : {"validate", "simulate", "decay-report", "hum", "observability", "convergence"})
        app.add_subcommand(name)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : sandwich::kExitConfig;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    sandwich::ScenarioConfig c;
    try {
        c = sandwich::load_config(config);
        if (seed >= 0) c.override_seed(static_cast<std::uint64_t>(seed));
        if (stride > 0) c.override_stride(stride);
    } catch (const sandwich::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return sandwich::kExitConfig;
    }
    sandwich::RunContext ctx;
    ctx.out = output_dir(out, c);
    ctx.quiet = quiet;
    ctx.log = &std::cerr;
    return sandwich::run_command(command, c, ctx);
}
