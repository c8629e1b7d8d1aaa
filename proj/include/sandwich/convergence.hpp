#pragma once

#include <string>
#include <vector>

#include "sandwich/scenario.hpp"

namespace sandwich {

struct ConvergenceRow {
    std::string kind;  // "spatial" or "temporal"
    int N = 0;
    double dt = 0;
    double error = 0;  // discrete L2 distance of the final displacements to the reference
    double order = 0;  // against the previous row of the same kind; NaN in the first
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    std::vector<std::string> flags;  // "degenerate:<kind>", "non_monotone:<kind>"

    std::vector<double> orders(const std::string& kind) const;
    bool flagged() const { return !flags.empty(); }
    std::string csv() const;
};

// Final displacement of u, v, w on nodes 0..N (eliminated nodes read 0).
Eigen::VectorXd nodal_displacements(const DiscreteState& s, const SemiDiscreteSystem& sys);

// Ladder of grids at the scenario's dt against a reference grid; every
// level must divide the reference.
ConvergenceTable spatial_study(const ScenarioConfig& c, const std::vector<int>& levels, int reference);
// Ladder of time steps at fixed N against dt_levels.back() / factor.
ConvergenceTable temporal_study(const ScenarioConfig& c, int N, const std::vector<double>& dt_levels, int factor);
// Both ladders as configured.
ConvergenceTable convergence_study(const ScenarioConfig& c);

}  // namespace sandwich
