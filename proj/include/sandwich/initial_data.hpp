#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "sandwich/grid.hpp"

namespace sandwich {

// Named initial-data presets.
//   zero
//   single_mode   {field, mode, amplitude}      displacement = amplitude * mode shape
//   random_smooth {seed, cutoff}                 decaying random modal sums for all fields
//   bump          {field, center, width, amplitude}  compactly supported smooth bump
struct InitialPreset {
    std::string kind = "zero";
    std::string field = "u";
    int mode = 1;
    double amplitude = 1.0;
    std::uint64_t seed = 1;
    int cutoff = 4;
    double center = 0.5;  // fraction of L
    double width = 0.25;  // fraction of L
};

// Mode shapes compatible with the essential conditions of each variant.
double mode_shape(Variant v, int field, int m, double x, double L);
double bump(double x, double center, double width);

int field_index(const std::string& name);

DiscreteState make_state(const InitialPreset& p, const SemiDiscreteSystem& sys);
// Fill q (or p) from nodal field functions.
void sample_fields(const SemiDiscreteSystem& sys, Eigen::VectorXd& target,
                   const std::function<double(int field, double x)>& f);

// Uniform in [-1, 1], independent of the standard library's distributions.
double uniform_pm1(std::mt19937_64& rng);

// Random state with modal coefficients ~ 1/m^2 up to the cutoff in every field.
DiscreteState random_smooth_state(const SemiDiscreteSystem& sys, std::mt19937_64& rng, int cutoff);

}  // namespace sandwich
