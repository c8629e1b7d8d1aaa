#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sandwich/grid.hpp"
#include "sandwich/hum.hpp"
#include "sandwich/initial_data.hpp"
#include "sandwich/integrator.hpp"
#include "sandwich/model.hpp"

namespace sandwich {

// Initial history of the delayed traces: zero or amplitude * sin(frequency * s).
struct HistorySpec {
    std::string kind = "zero";
    double amplitude = 0;
    double frequency = 1;

    ScalarFn value() const;
    ScalarFn slope() const;
};

struct DecayOptions {
    double window_begin = 0, window_end = 0;  // begin >= end: [0.2 T, 0.9 T]
    double slack = 1.05;
    double mu4_cap = 0.5;
    double rate_fraction = 0.95;  // fitted rate must reach this share of the bound's exponent
};

struct HumOptions {
    HumConfig cfg;
    double terminal_tol = 1e-3;
};

struct ObservabilityOptions {
    int samples = 20;
    int cutoff = 6;
    std::uint64_t seed = 1;
};

struct ConvergenceOptions {
    bool spatial = true, temporal = true;
    std::vector<int> levels{16, 32, 64, 128};
    int reference = 512;
    int temporal_N = 16;
    std::vector<double> dt_levels{0.02, 0.01, 0.005};
    int dt_reference_factor = 16;
};

struct ScenarioConfig {
    PhysicalParams params;
    Variant variant = Variant::StabilizedDelayed;
    ModelSpecs specs;
    int N = 64;
    SchemeConfig scheme;
    InitialPreset initial;
    HistorySpec history;
    DecayOptions decay;
    HumOptions hum;
    ObservabilityOptions observability;
    ConvergenceOptions convergence;
    std::filesystem::path output_dir = "out";
    // normalized key = value listing the hash is taken over
    std::string canonical;

    SemiDiscreteSystem system() const { return system(N); }
    SemiDiscreteSystem system(int n) const;
    InitialData initial_data(const SemiDiscreteSystem& sys) const;
    std::string hash() const;

    // --seed and --stride overrides; they also enter the canonical text.
    void override_seed(std::uint64_t seed);
    void override_stride(int stride);
};

// INI text: [section] headers and key = value lines, ';' or '#' comments.
// Unknown sections or keys, duplicates and malformed values raise ConfigError.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

}  // namespace sandwich
