#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "sandwich/io.hpp"
#include "sandwich/scenario.hpp"

using namespace sandwich;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kConfigs = std::string(SANDWICH_SOURCE_DIR) + "/tools/configs/";

fs::path scratch() {
    static const fs::path root = [] {
        auto p = fs::temp_directory_path() / ("sandwich_cli_" + std::to_string(::getpid()));
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

fs::path write_config(const std::string& name, const std::string& text) {
    const auto p = scratch() / (name + ".ini");
    std::ofstream(p) << text;
    return p;
}

int cli(const std::string& args) {
    const std::string cmd = std::string(SANDWICH_CLI) + " " + args + " --quiet > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

int run(const std::string& command, const fs::path& config, const fs::path& out, const std::string& extra = "") {
    return cli(command + " --config " + config.string() + " --out " + out.string() + " " + extra);
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

std::vector<std::vector<double>> read_csv(const fs::path& p) {
    std::istringstream in(read_file(p));
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> r;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) r.push_back(std::strtod(cell.c_str(), nullptr));
        rows.push_back(r);
    }
    return rows;
}

const char* kSmallDelayed = R"(
[run]
variant = A
N = 16
dt = 0.01
T = 2
stride = 10
[gains]
alpha = 1.5
beta = 0.5
[delay]
kind = sinusoidal
mean = 0.5
amplitude = 0.25
frequency = 2
[damping]
a = 1
[initial]
preset = random_smooth
seed = 2
cutoff = 2
)";

}  // namespace

TEST_CASE("config parsing rejects malformed input") {
    CHECK_NOTHROW(parse_config("[run]\nvariant = B\n"));
    CHECK_THROWS_AS(parse_config("[bogus]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[run]\nwibble = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("N = 16\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[run]\nN = 16x\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[run]\ndt = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[run]\nN = 16\nN = 32\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[run]\nvariant = C\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[gains]\nalpha = 1, 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[observability]\nsamples = 5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[delay]\nkind = jittery\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nE1h1 = 2\n[layers]\nE = 1, 1, 1\n"), ConfigError);
}

TEST_CASE("config values and derived defaults") {
    const auto c = parse_config(std::string(kSmallDelayed) + "[model]\nk = 2\n");
    CHECK(c.variant == Variant::StabilizedDelayed);
    CHECK(c.N == 16);
    CHECK(c.params.k == 2);
    CHECK(c.specs.gains.alpha[2] == 1.5);
    CHECK(c.specs.delays[1].tau0 == doctest::Approx(0.25));
    CHECK(c.specs.delays[1].M == doctest::Approx(0.75));
    CHECK(c.specs.delays[1].d == doctest::Approx(0.5));
    CHECK(c.specs.damping[0].a0 == 1.0);
    // comments and spacing do not enter the hash
    const auto d = parse_config("; note\n" + std::string(kSmallDelayed) + "# more\n[model]\nk   =   2\n");
    CHECK(c.hash() == d.hash());
    CHECK(c.hash() != parse_config(kSmallDelayed).hash());
}

TEST_CASE("layer data fills the composite coefficients") {
    const auto c = parse_config("[layers]\nrho = 2, 1, 3\nh = 0.5, 0.2, 0.4\nE = 4, 1, 6\nI = 1, 1, 0.5\n");
    CHECK(c.params.rho1h1 == doctest::Approx(1.0));
    CHECK(c.params.E1h1 == doctest::Approx(2.0));
    CHECK(c.params.rho3h3 == doctest::Approx(1.2));
    CHECK(c.params.E3h3 == doctest::Approx(2.4));
}

TEST_CASE("validate exit codes") {
    const auto dir = scratch() / "validate";
    CHECK(run("validate", kConfigs + "delayed.ini", dir) == 0);
    CHECK(read_json(dir / "validate.json")["pass"] == true);

    // appended after [initial], where these keys are unknown
    const auto bad = write_config("bad_key", std::string(kSmallDelayed) + "tau0 = 0.25\nd = 1.0\n");
    const auto rate = write_config("rate", R"(
[run]
variant = A
N = 16
[gains]
alpha = 1.5
beta = 0.5
[delay]
kind = constant
tau = 0.5
d = 1.0
)");
    CHECK(run("validate", rate, dir / "rate") == 1);
    const auto j = read_json(dir / "rate" / "validate.json");
    CHECK(j["pass"] == false);
    CHECK(j["first_failure"].get<std::string>().find("delay_rate") == 0);
    CHECK(run("validate", bad, dir / "bad") == 2);

    CHECK(cli("validate") == 2);
    CHECK(cli("frobnicate --config " + kConfigs + "delayed.ini") == 2);
    CHECK(run("validate", scratch() / "missing.ini", dir / "missing") == 2);
}

TEST_CASE("simulate writes trajectories and invariants") {
    const auto dir = scratch() / "simulate";
    const auto zero = write_config("zero", "[run]\nvariant = A\nN = 16\nT = 1\n[gains]\nalpha = 1\nbeta = 0.5\n"
                                           "[delay]\ntau = 0.3\n[initial]\npreset = zero\n");
    CHECK(run("simulate", zero, dir / "zero") == 0);
    const auto rows = read_csv(dir / "zero" / "trajectory.csv");
    REQUIRE(rows.size() > 1);
    for (const auto& r : rows)
        for (std::size_t k = 1; k < r.size(); ++k) CHECK(r[k] == 0.0);

    CHECK(run("simulate", kConfigs + "conservative.ini", dir / "cons") == 0);
    const auto m = read_json(dir / "cons" / "manifest.json");
    CHECK(m["invariants"]["conservative"] == true);
    CHECK(m["invariants"]["relative_energy_drift"].get<double>() <= 1e-8);
    CHECK(m["status"] == "ok");

    CHECK(run("simulate", kConfigs + "delayed.ini", dir / "del") == 0);
    CHECK(read_json(dir / "del" / "manifest.json")["invariants"]["monotone_energy"] == true);
}

TEST_CASE("a failing run keeps its partial trajectory") {
    const auto dir = scratch() / "partial";
    const auto fast = write_config("fast", R"(
[run]
variant = A
N = 16
dt = 0.01
T = 3
[gains]
alpha = 1.5
beta = 0.5
[delay]
kind = sinusoidal
mean = 0.5
amplitude = 0.4
frequency = 4
[initial]
preset = random_smooth
)");
    CHECK(run("simulate", fast, dir) == 3);
    const auto m = read_json(dir / "manifest.json");
    CHECK(m["status"] == "partial");
    CHECK(fs::exists(dir / "trajectory.csv"));
    CHECK(read_csv(dir / "trajectory.csv").back()[0] < 3.0);
}

TEST_CASE("decay report") {
    const auto dir = scratch() / "decay";
    CHECK(run("decay-report", kConfigs + "delayed.ini", dir) == 0);
    const auto j = read_json(dir / "decay.json");
    CHECK(j["pass"] == true);
    CHECK(j["bound_violations"] == 0);
    CHECK(read_file(dir / "decay.csv").rfind("t,E,L,bound,residual\n", 0) == 0);
    CHECK(run("decay-report", kConfigs + "conservative.ini", dir / "b") == 2);
}

TEST_CASE("hum exit codes") {
    const auto dir = scratch() / "hum";
    const auto zero = write_config("hum_zero", "[run]\nvariant = B\nN = 16\n[initial]\npreset = zero\n");
    CHECK(run("hum", zero, dir / "zero") == 0);
    CHECK(read_json(dir / "zero" / "hum.json")["terminal_relative_norm"] == 0.0);

    CHECK(run("hum", kConfigs + "null_control.ini", dir / "mode") == 0);
    CHECK(read_json(dir / "mode" / "hum.json")["terminal_relative_norm"].get<double>() <= 1e-3);
    CHECK(read_file(dir / "mode" / "controls.csv").rfind("t,f1,f2,f3\n", 0) == 0);

    const auto strict = write_config("hum_strict", R"(
[run]
variant = B
N = 8
[initial]
preset = single_mode
[hum]
T = 2
cg_tol = 1e-12
terminal_tol = 1e-12
max_iterations = 20
)");
    CHECK(run("hum", strict, dir / "strict") == 3);
    CHECK(run("hum", kConfigs + "delayed.ini", dir / "a") == 2);
}

TEST_CASE("observability and convergence") {
    const auto dir = scratch() / "obs";
    CHECK(run("observability", kConfigs + "null_control.ini", dir) == 0);
    const auto j = read_json(dir / "observability.json");
    CHECK(j["levels"][0]["min_quotient"].get<double>() > 0);
    CHECK(j["pass"] == true);

    const auto conv = scratch() / "conv";
    CHECK(run("convergence", kConfigs + "convergence.ini", conv) == 0);
    int spatial = 0, temporal = 0;
    std::istringstream in(read_file(conv / "convergence.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "kind,N,dt,error,order");
    while (std::getline(in, line)) {
        const auto kind = line.substr(0, line.find(','));
        const double order = std::strtod(line.substr(line.rfind(',') + 1).c_str(), nullptr);
        if (std::isnan(order)) continue;
        CHECK(order == doctest::Approx(2.0).epsilon(0.15));
        (kind == "spatial" ? spatial : temporal)++;
    }
    CHECK(spatial == 3);
    CHECK(temporal == 2);

    const auto flat = write_config("conv_zero", "[run]\nvariant = A\ndt = 0.001\nT = 0.2\n[delay]\ntau = 0.3\n"
                                                "[initial]\npreset = zero\n[convergence]\nmode = spatial\n"
                                                "levels = 16, 32, 64\nreference = 128\n");
    CHECK(run("convergence", flat, scratch() / "conv_zero") == 1);
}

TEST_CASE("runs are reproducible and overridable") {
    const auto cfg = write_config("det", kSmallDelayed);
    const auto a = scratch() / "det_a", b = scratch() / "det_b", s = scratch() / "det_s";
    REQUIRE(run("simulate", cfg, a) == 0);
    REQUIRE(run("simulate", cfg, b) == 0);
    CHECK(read_file(a / "trajectory.csv") == read_file(b / "trajectory.csv"));
    const auto ma = read_json(a / "manifest.json"), mb = read_json(b / "manifest.json");
    CHECK(ma["config_hash"] == mb["config_hash"]);
    CHECK(ma["config_hash"].get<std::string>().size() == 16);
    CHECK_FALSE(ma["version"].get<std::string>().empty());
    CHECK(ma["seed"] == 2);

    REQUIRE(run("simulate", cfg, s, "--seed 9 --stride 5") == 0);
    const auto ms = read_json(s / "manifest.json");
    CHECK(ms["seed"] == 9);
    CHECK(ms["config_hash"] != ma["config_hash"]);
    CHECK(read_file(s / "trajectory.csv") != read_file(a / "trajectory.csv"));
    CHECK(read_csv(s / "trajectory.csv").size() == 41);

    const auto env = scratch() / "from_env";
    ::setenv("SANDWICH_OUTPUT_DIR", env.c_str(), 1);
    CHECK(cli("simulate --config " + cfg.string()) == 0);
    ::unsetenv("SANDWICH_OUTPUT_DIR");
    CHECK(fs::exists(env / "trajectory.csv"));
    CHECK(cli("simulate --config " + cfg.string() + " --seed -1") == 2);
    CHECK(cli("simulate --config " + cfg.string() + " --stride 0") == 2);
}
