#include "sandwich/convergence.hpp"

#include <cmath>
#include <limits>

#include "sandwich/io.hpp"

namespace sandwich {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

DiscreteState final_state(const ScenarioConfig& c, const SemiDiscreteSystem& sys, double dt) {
    SchemeConfig scheme = c.scheme;
    scheme.dt = dt;
    scheme.stride = std::numeric_limits<int>::max();
    return simulate(c.initial_data(sys), sys, scheme, c.specs).final_state();
}

double l2(const Eigen::VectorXd& d, double dx) { return std::sqrt(dx * d.squaredNorm()); }

void finish(ConvergenceTable& tab, const std::string& kind, std::size_t first, double ref_norm) {
    if (!(ref_norm > 0)) tab.flags.push_back("degenerate:" + kind);
    bool monotone = true;
    for (std::size_t k = first + 1; k < tab.rows.size(); ++k)
        if (!(tab.rows[k].error < tab.rows[k - 1].error)) monotone = false;
    if (!monotone && ref_norm > 0) tab.flags.push_back("non_monotone:" + kind);
}

}  // namespace

Eigen::VectorXd nodal_displacements(const DiscreteState& s, const SemiDiscreteSystem& sys) {
    const auto& l = sys.layout;
    const int N = sys.grid.N;
    Eigen::VectorXd f = Eigen::VectorXd::Zero(3 * (N + 1));
    for (int j = 0; j <= N; ++j) {
        if (l.iu(j) >= 0) f[j] = s.q[l.iu(j)];
        if (l.iv(j) >= 0) f[N + 1 + j] = s.q[l.iv(j)];
        if (l.iw(j) >= 0) f[2 * (N + 1) + j] = s.q[l.iw(j)];
    }
    return f;
}

std::vector<double> ConvergenceTable::orders(const std::string& kind) const {
    std::vector<double> o;
    for (const auto& r : rows)
        if (r.kind == kind && std::isfinite(r.order)) o.push_back(r.order);
    return o;
}

std::string ConvergenceTable::csv() const {
    std::string s = "kind,N,dt,error,order\n";
    for (const auto& r : rows)
        s += r.kind + "," + std::to_string(r.N) + "," + format_number(r.dt) + "," + format_number(r.error) + "," +
             format_number(r.order) + "\n";
    return s;
}

ConvergenceTable spatial_study(const ScenarioConfig& c, const std::vector<int>& levels, int reference) {
    if (levels.size() < 3) throw ConfigError("convergence needs at least three resolutions");
    for (std::size_t k = 0; k < levels.size(); ++k) {
        if (levels[k] < 8 || reference % levels[k] != 0)
            throw ConfigError("every spatial level must be >= 8 and divide the reference");
        if (k && levels[k] <= levels[k - 1]) throw ConfigError("spatial levels must increase");
    }
    if (reference <= levels.back()) throw ConfigError("reference grid must be finer than every level");
    ConvergenceTable tab;
    const auto ref_sys = c.system(reference);
    const Eigen::VectorXd ref = nodal_displacements(final_state(c, ref_sys, c.scheme.dt), ref_sys);
    const int Nr = reference;
    double prev = kNaN, prev_h = kNaN;
    double ref_norm = 0;
    for (int N : levels) {
        const auto sys = c.system(N);
        const Eigen::VectorXd u = nodal_displacements(final_state(c, sys, c.scheme.dt), sys);
        const int stride = Nr / N;
        Eigen::VectorXd diff(u.size()), restricted(u.size());
        for (int f = 0; f < 3; ++f)
            for (int j = 0; j <= N; ++j) {
                restricted[f * (N + 1) + j] = ref[f * (Nr + 1) + j * stride];
                diff[f * (N + 1) + j] = u[f * (N + 1) + j] - restricted[f * (N + 1) + j];
            }
        const double h = sys.grid.dx;
        const double e = l2(diff, h);
        ref_norm = std::max(ref_norm, l2(restricted, h));
        const double order = std::isfinite(prev) && e > 0 ? std::log(prev / e) / std::log(prev_h / h) : kNaN;
        tab.rows.push_back({"spatial", N, c.scheme.dt, e, order});
        prev = e;
        prev_h = h;
    }
    finish(tab, "spatial", 0, ref_norm);
    return tab;
}

ConvergenceTable temporal_study(const ScenarioConfig& c, int N, const std::vector<double>& dt_levels, int factor) {
    if (dt_levels.size() < 3) throw ConfigError("convergence needs at least three resolutions");
    for (std::size_t k = 1; k < dt_levels.size(); ++k)
        if (!(dt_levels[k] < dt_levels[k - 1])) throw ConfigError("time-step levels must decrease");
    if (factor < 2) throw ConfigError("dt_reference_factor must be >= 2");
    ConvergenceTable tab;
    const auto sys = c.system(N);
    const Eigen::VectorXd ref = nodal_displacements(final_state(c, sys, dt_levels.back() / factor), sys);
    const double ref_norm = l2(ref, sys.grid.dx);
    double prev = kNaN, prev_dt = kNaN;
    for (double dt : dt_levels) {
        const double e = l2(nodal_displacements(final_state(c, sys, dt), sys) - ref, sys.grid.dx);
        const double order = std::isfinite(prev) && e > 0 ? std::log(prev / e) / std::log(prev_dt / dt) : kNaN;
        tab.rows.push_back({"temporal", N, dt, e, order});
        prev = e;
        prev_dt = dt;
    }
    finish(tab, "temporal", 0, ref_norm);
    return tab;
}

ConvergenceTable convergence_study(const ScenarioConfig& c) {
    ConvergenceTable tab;
    const auto& o = c.convergence;
    if (o.spatial) tab = spatial_study(c, o.levels, o.reference);
    if (o.temporal) {
        auto t = temporal_study(c, o.temporal_N, o.dt_levels, o.dt_reference_factor);
        tab.rows.insert(tab.rows.end(), t.rows.begin(), t.rows.end());
        tab.flags.insert(tab.flags.end(), t.flags.begin(), t.flags.end());
    }
    return tab;
}

}  // namespace sandwich
