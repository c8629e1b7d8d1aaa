#include "sandwich/stabilization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sandwich/io.hpp"

namespace sandwich {

namespace {

void require_ledger(const SimOutput& out) {
    if (out.variant != Variant::StabilizedDelayed) throw std::invalid_argument("needs a stabilized-variant run");
    if (out.ledger.empty() || out.energy.size() != out.ledger.size() + 1)
        throw std::invalid_argument("simulation output carries no step ledger");
}

}  // namespace

std::vector<double> check_dissipation_identity(const SimOutput& out) {
    require_ledger(out);
    std::vector<double> r(out.ledger.size());
    for (std::size_t n = 0; n < r.size(); ++n) {
        const auto& led = out.ledger[n];
        double rhs = led.damping_power;
        for (double b : led.boundary_form) rhs += b;
        const double dt = out.t[n + 1] - out.t[n];
        r[n] = std::abs((out.energy[n + 1] - out.energy[n]) / dt - rhs);
    }
    return r;
}

std::vector<double> lyapunov_trace(const SimOutput& out, const TheoreticalRates& rates, const GainConfig& gains) {
    if (out.variant != Variant::StabilizedDelayed) throw std::invalid_argument("needs a stabilized-variant run");
    std::vector<double> L(out.energy.size());
    for (std::size_t n = 0; n < L.size(); ++n) {
        double v = out.energy[n] + rates.mu0 * out.cross[n];
        for (int i = 0; i < 3; ++i) v += rates.mu[i] * 0.5 * std::abs(gains.beta[i]) * out.delay_wint[i][n];
        L[n] = v;
    }
    return L;
}

LinearFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& E, double t0, double t1,
                         double floor) {
    if (t.size() != E.size() || t.empty()) throw std::invalid_argument("time and energy series differ in length");
    if (!(t1 > t0)) throw std::invalid_argument("empty fit window");
    const double cut = floor * E.front();
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    int n = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < t0 - 1e-12 || t[k] > t1 + 1e-12) continue;
        if (!(E[k] > 0)) throw std::domain_error("nonpositive energy in the fit window");
        if (E[k] < cut) continue;
        const double y = std::log(E[k]);
        sx += t[k];
        sy += y;
        sxx += t[k] * t[k];
        sxy += t[k] * y;
        syy += y * y;
        ++n;
    }
    if (n < 2) throw std::domain_error("fewer than two usable samples in the fit window");
    const double vx = sxx - sx * sx / n, vy = syy - sy * sy / n, cxy = sxy - sx * sy / n;
    LinearFit f;
    const double slope = cxy / vx;
    f.omega = -slope;
    f.intercept = (sy - slope * sx) / n;
    f.r2 = vy > 0 ? cxy * cxy / (vx * vy) : 1.0;
    f.points = n;
    return f;
}

DecayReport check_theoretical_bound(const SimOutput& out, const TheoreticalRates& rates, double slack,
                                    double window_begin, double window_end) {
    DecayReport rep;
    rep.rates = rates;
    rep.theoretical_rate = rates.decay_exponent();
    rep.zeta = rates.zeta;
    const double E0 = out.energy.front();
    for (std::size_t n = 0; n < out.energy.size(); ++n)
        if (out.energy[n] > slack * decay_bound(out.t[n], E0, rates)) ++rep.bound_violations;
    const double T = out.t.back();
    if (!(window_end > window_begin)) {
        window_begin = 0.2 * T;
        window_end = 0.9 * T;
    }
    if (window_begin < 0 || window_end > T + 1e-12) throw std::invalid_argument("fit window outside the run");
    rep.window_begin = window_begin;
    rep.window_end = window_end;
    if (E0 > 0) rep.fit = fit_decay_rate(out.t, out.energy, window_begin, window_end);
    if (!out.ledger.empty()) {
        const auto r = check_dissipation_identity(out);
        rep.max_residual = *std::max_element(r.begin(), r.end());
    }
    return rep;
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
    double s = 0;
    for (std::size_t k = 1; k < t.size(); ++k) s += 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
    return s;
}

TraceEstimateReport check_trace_estimates(const SimOutput& out, const SemiDiscreteSystem& sys,
                                          const ModelSpecs& specs) {
    if (out.variant != Variant::StabilizedDelayed) throw std::invalid_argument("needs a stabilized-variant run");
    const auto& g = specs.gains;
    const std::size_t n = out.t.size();
    const double T = out.t.back();
    TraceEstimateReport rep;

    // step means from the ledger: the quantities the discrete balance controls
    require_ledger(out);
    std::array<double, 3> tr{}, zz{};
    for (std::size_t k = 0; k < out.ledger.size(); ++k) {
        const double dt = out.t[k + 1] - out.t[k];
        for (int i = 0; i < 3; ++i) {
            tr[i] += dt * out.ledger[k].y_mid[i] * out.ledger[k].y_mid[i];
            zz[i] += dt * out.ledger[k].z_mid[i] * out.ledger[k].z_mid[i];
        }
    }
    double delay0 = 0;
    for (int i = 0; i < 3; ++i) delay0 += std::abs(g.beta[i]) * out.delay_int[i][0];
    const double U0sq = 2.0 * out.quad_energy[0];
    rep.trace_lhs = tr[0] + tr[1] + tr[2] + zz[0] + zz[1] + zz[2];
    rep.trace_rhs = U0sq + delay0;

    // E(0) bounds c * lhs, c the smallest eigenvalue of -Phi/2 at the declared d
    double c = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        const auto phi = phi_matrix(i, specs.delays[i].d, sys.params, g);
        const double a = -0.5 * phi.m11, b = -0.5 * phi.m12, d = -0.5 * phi.m22;
        const double lam = 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + b * b);
        c = std::min(c, g.beta[i] == 0.0 ? a : lam);
    }
    rep.trace_rhs_scaled = c > 0 ? out.energy[0] / c : std::numeric_limits<double>::infinity();

    std::vector<double> U2(n);
    for (std::size_t k = 0; k < n; ++k) U2[k] = 2.0 * out.quad_energy[k];
    double asum = 0;
    for (int i = 0; i < 3; ++i) asum += specs.damping[i].sup();
    rep.initial_lhs = U0sq;
    rep.initial_rhs = (T > 0 ? trapezoid(out.t, U2) / T : U0sq) + 2.0 * asum * trapezoid(out.t, out.kinetic_l2);
    for (int i = 0; i < 3; ++i)
        rep.initial_rhs += sys.flux[i] * (2 * g.alpha[i] + std::abs(g.beta[i])) * tr[i] + std::abs(g.beta[i]) * zz[i];
    return rep;
}

std::string DecayReport::to_json() const {
    nlohmann::ordered_json j;
    j["fit"] = {{"omega", fit.omega}, {"intercept", fit.intercept}, {"r2", fit.r2}, {"points", fit.points}};
    j["window"] = {window_begin, window_end};
    j["theoretical_rate"] = theoretical_rate;
    j["zeta"] = zeta;
    j["bound_violations"] = bound_violations;
    j["max_dissipation_residual"] = max_residual;
    j["rates"] = {{"mu0", rates.mu0},
                  {"mu", rates.mu},
                  {"mu4", rates.mu4},
                  {"lambda", rates.lambda},
                  {"mu4_mass_reading", rates.mu4_mass_reading},
                  {"mu4_layer_reading", std::isfinite(rates.mu4_layer_reading) ? nlohmann::ordered_json(rates.mu4_layer_reading) : nlohmann::ordered_json(nullptr)},
                  {"mu4_sharp", rates.mu4_sharp},
                  {"bisection_steps", rates.bisection_steps}};
    return j.dump(2);
}

std::string TraceEstimateReport::to_json() const {
    nlohmann::ordered_json j;
    j["trace"] = {{"lhs", trace_lhs}, {"rhs", trace_rhs}, {"slack", trace_slack()}, {"rhs_scaled", trace_rhs_scaled}};
    j["initial"] = {{"lhs", initial_lhs}, {"rhs", initial_rhs}, {"slack", initial_slack()}};
    j["pass"] = pass();
    return j.dump(2);
}

std::string decay_csv(const SimOutput& out, const std::vector<double>& lyap, const TheoreticalRates& rates,
                      const std::vector<double>& residual) {
    CsvTable tab({"t", "E", "L", "bound", "residual"});
    const double E0 = out.energy.front();
    for (long n : out.sample_step)
        tab.add({out.t[n], out.energy[n], lyap[n], decay_bound(out.t[n], E0, rates), n > 0 ? residual[n - 1] : 0.0});
    return tab.str();
}

}  // namespace sandwich
