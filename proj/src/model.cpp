#include "sandwich/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace sandwich {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

std::string ch_id(const char* base, int i) {
    return std::string(base) + "_" + std::to_string(i + 1);
}

}  // namespace

void PhysicalParams::validate() const {
    const std::pair<const char*, double> fields[] = {
        {"rho1h1", rho1h1}, {"E1h1", E1h1}, {"rho3h3", rho3h3}, {"E3h3", E3h3}, {"rhoh", rhoh},
        {"EI", EI},         {"k", k},       {"alpha", alpha},   {"L", L}};
    for (auto& [name, v] : fields) {
        if (!(v > 0) || !std::isfinite(v))
            throw ConfigError(std::string("physical parameter ") + name + " must be positive and finite");
    }
    if (layers) {
        const auto& ly = *layers;
        for (int i = 0; i < 3; ++i) {
            if (!(ly.rho[i] > 0) || !(ly.h[i] > 0) || !(ly.E[i] > 0) || !(ly.I[i] > 0))
                throw ConfigError("layer " + std::to_string(i + 1) + " inputs must be positive");
        }
        const double tol = 1e-12;
        if (!close_rel(rhoh, ly.rho[0] * ly.h[0] + ly.rho[1] * ly.h[1] + ly.rho[2] * ly.h[2], tol))
            throw ConfigError("rhoh inconsistent with layer inputs");
        if (!close_rel(EI, ly.E[0] * ly.I[0] + ly.E[2] * ly.I[2], tol))
            throw ConfigError("EI inconsistent with layer inputs");
        if (!close_rel(alpha, ly.h[1] + 0.5 * (ly.h[0] + ly.h[2]), tol))
            throw ConfigError("alpha inconsistent with layer inputs");
        if (!close_rel(rho1h1, ly.rho[0] * ly.h[0], tol) || !close_rel(rho3h3, ly.rho[2] * ly.h[2], tol) ||
            !close_rel(E1h1, ly.E[0] * ly.h[0], tol) || !close_rel(E3h3, ly.E[2] * ly.h[2], tol))
            throw ConfigError("outer layer coefficients inconsistent with layer inputs");
    }
}

PhysicalParams PhysicalParams::from_layers(const LayerInputs& ly, double k, double L) {
    PhysicalParams p;
    p.rho1h1 = ly.rho[0] * ly.h[0];
    p.E1h1 = ly.E[0] * ly.h[0];
    p.rho3h3 = ly.rho[2] * ly.h[2];
    p.E3h3 = ly.E[2] * ly.h[2];
    p.rhoh = ly.rho[0] * ly.h[0] + ly.rho[1] * ly.h[1] + ly.rho[2] * ly.h[2];
    p.EI = ly.E[0] * ly.I[0] + ly.E[2] * ly.I[2];
    p.alpha = ly.h[1] + 0.5 * (ly.h[0] + ly.h[2]);
    p.k = k;
    p.L = L;
    p.layers = ly;
    return p;
}

double PhysicalParams::flux_coefficient(int channel) const {
    switch (channel) {
        case 0: return E1h1;
        case 1: return E3h3;
        case 2: return EI;
    }
    throw std::out_of_range("channel index must be 0..2");
}

double PhysicalParams::mass_coefficient(int channel) const {
    switch (channel) {
        case 0: return rho1h1;
        case 1: return rho3h3;
        case 2: return rhoh;
    }
    throw std::out_of_range("channel index must be 0..2");
}

double PhysicalParams::c_min() const {
    return std::min(std::sqrt(E1h1 / rho1h1), std::sqrt(E3h3 / rho3h3));
}

double tau_value(const DelayFunction& f, double t) {
    return std::visit(overloaded{[](const ConstantDelay& c) { return c.tau; },
                                 [t](const SinusoidalDelay& s) {
                                     return s.mean + s.amplitude * std::sin(s.frequency * t);
                                 }},
                      f);
}

double tau_rate(const DelayFunction& f, double t) {
    return std::visit(overloaded{[](const ConstantDelay&) { return 0.0; },
                                 [t](const SinusoidalDelay& s) {
                                     return s.amplitude * s.frequency * std::cos(s.frequency * t);
                                 }},
                      f);
}

double tau_min(const DelayFunction& f) {
    return std::visit(overloaded{[](const ConstantDelay& c) { return c.tau; },
                                 [](const SinusoidalDelay& s) {
                                     return s.frequency == 0 ? s.mean : s.mean - std::abs(s.amplitude);
                                 }},
                      f);
}

double tau_max(const DelayFunction& f) {
    return std::visit(overloaded{[](const ConstantDelay& c) { return c.tau; },
                                 [](const SinusoidalDelay& s) {
                                     return s.frequency == 0 ? s.mean : s.mean + std::abs(s.amplitude);
                                 }},
                      f);
}

double tau_rate_max(const DelayFunction& f) {
    return std::visit(overloaded{[](const ConstantDelay&) { return 0.0; },
                                 [](const SinusoidalDelay& s) { return std::abs(s.amplitude * s.frequency); }},
                      f);
}

double DelaySpec::min_tau0() const {
    return std::min({ch[0].tau0, ch[1].tau0, ch[2].tau0});
}

double DampingChannel::operator()(double t) const {
    return std::visit(overloaded{[](const ConstantDamping& c) { return c.a; },
                                 [t](const ExponentialDamping& e) {
                                     return e.floor_value + (e.initial - e.floor_value) * std::exp(-e.rate * t);
                                 }},
                      a);
}

double DampingChannel::sup() const {
    return std::visit(overloaded{[](const ConstantDamping& c) { return c.a; },
                                 [](const ExponentialDamping& e) {
                                     return e.rate > 0 ? std::max(e.initial, e.floor_value) : e.initial;
                                 }},
                      a);
}

bool HypothesisReport::all_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

const HypothesisEntry* HypothesisReport::find(const std::string& id) const {
    for (const auto& e : entries)
        if (e.condition_id == id) return &e;
    return nullptr;
}

std::string HypothesisReport::first_failure() const {
    for (const auto& e : entries)
        if (!e.pass) return e.condition_id;
    return {};
}

double gain_threshold(double C, double beta, double d) {
    return std::abs(beta) / (2.0 * C) * ((C * C + 1.0 - d) / (1.0 - d));
}

HypothesisReport validate_gains(const PhysicalParams& params, const GainConfig& gains,
                                const DelaySpec& delays) {
    HypothesisReport rep;
    for (int i = 0; i < 3; ++i) {
        const double d = delays[i].d;
        if (!(d < 1.0) || !(d >= 0.0)) {
            std::ostringstream os;
            os << "delay derivative bound d_" << i + 1 << " = " << d << " outside [0,1)";
            throw HypothesisViolation(ch_id("delay_rate_bound", i), os.str());
        }
        const double C = params.flux_coefficient(i);
        HypothesisEntry e;
        e.condition_id = ch_id("gain", i);
        e.lhs = gains.alpha[i];
        e.rhs = gain_threshold(C, gains.beta[i], d);
        e.margin = e.lhs - e.rhs;
        e.pass = e.lhs > e.rhs;
        rep.entries.push_back(e);
    }
    return rep;
}

HypothesisReport validate_delays(const DelaySpec& delays) {
    HypothesisReport rep;
    for (int i = 0; i < 3; ++i) {
        const auto& c = delays[i];
        const double lo = tau_min(c.tau), hi = tau_max(c.tau), rate = tau_rate_max(c.tau);
        rep.entries.push_back({ch_id("delay_positive", i), c.tau0, 0.0, c.tau0, c.tau0 > 0});
        rep.entries.push_back({ch_id("delay_lower", i), lo, c.tau0, lo - c.tau0, lo >= c.tau0});
        rep.entries.push_back({ch_id("delay_upper", i), hi, c.M, c.M - hi, hi <= c.M});
        rep.entries.push_back({ch_id("delay_rate", i), rate, c.d, c.d - rate, rate <= c.d});
        rep.entries.push_back({ch_id("delay_rate_bound", i), c.d, 1.0, 1.0 - c.d, c.d < 1.0 && c.d >= 0.0});
    }
    return rep;
}

HypothesisReport validate_damping(const DampingSpec& damping) {
    HypothesisReport rep;
    for (int i = 0; i < 3; ++i) {
        const auto& c = damping[i];
        double inf = 0, slope_sign = 0;
        std::visit(overloaded{[&](const ConstantDamping& k) { inf = k.a; },
                              [&](const ExponentialDamping& e) {
                                  inf = e.rate > 0 ? std::min(e.floor_value, e.initial) : e.initial;
                                  slope_sign = -e.rate * (e.initial - e.floor_value);
                              }},
                   c.a);
        rep.entries.push_back({ch_id("damping_floor_positive", i), c.a0, 0.0, c.a0, c.a0 > 0});
        rep.entries.push_back({ch_id("damping_floor", i), inf, c.a0, inf - c.a0, inf >= c.a0});
        rep.entries.push_back({ch_id("damping_monotone", i), slope_sign, 0.0, -slope_sign, slope_sign <= 0});
    }
    return rep;
}

BoundaryQuadForm phi_matrix(int channel, double d, const PhysicalParams& params, const GainConfig& gains) {
    if (channel < 0 || channel > 2) throw std::out_of_range("channel index must be 0..2");
    if (!(d >= 0.0 && d < 1.0)) throw HypothesisViolation(ch_id("delay_rate_bound", channel), "d outside [0,1)");
    const double C = params.flux_coefficient(channel);
    const double a = gains.alpha[channel], b = gains.beta[channel];
    BoundaryQuadForm m;
    m.channel = channel;
    m.m11 = -2.0 * C * a + std::abs(b);
    m.m12 = -C * b;
    m.m22 = std::abs(b) * (d - 1.0);
    return m;
}

bool is_negative_definite(const BoundaryQuadForm& m) {
    return m.m11 < 0 && m.det() > 0;
}

double young_constant(int channel, const PhysicalParams& params) {
    const double eps = 0.5;
    return params.flux_coefficient(channel) * params.L / (4.0 * eps);
}

BoundaryQuadForm pi_matrix(int channel, double d, double mu0, double mu_i, const PhysicalParams& params,
                           const GainConfig& gains) {
    BoundaryQuadForm m = phi_matrix(channel, d, params, gains);
    const double a = gains.alpha[channel], b = gains.beta[channel];
    // factor 2: the boundary form enters the derivative as 1/2 <Pi x, x>
    const double ce = 2.0 * mu0 * young_constant(channel, params);
    m.m11 += ce * a * a + mu_i * std::abs(b);
    m.m12 += ce * a * b;
    m.m22 += ce * b * b;
    return m;
}

namespace {

double mu4_with(double mu0, const std::array<double, 3>& mu, const PhysicalParams& p, double wave_factor) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double L2 = p.L * p.L;
    return std::max({mu0, wave_factor * mu0 * p.rho1h1 * L2 / (p.E1h1 * pi2),
                     wave_factor * mu0 * p.rho3h3 * L2 / (p.E3h3 * pi2), mu0 * p.rhoh * L2 * L2 / (p.EI * pi2 * pi2),
                     mu[0], mu[1], mu[2]});
}

}  // namespace

double mu4_of(double mu0, const std::array<double, 3>& mu, const PhysicalParams& params) {
    return mu4_with(mu0, mu, params, 1.0);
}

double lambda_of(double mu0, const PhysicalParams& p, const DampingSpec& damping) {
    return std::min({mu0, 2.0 * (damping[0].a0 / p.rho1h1 - mu0), 2.0 * (damping[1].a0 / p.rho3h3 - mu0),
                     2.0 * (damping[2].a0 / p.rhoh - mu0)});
}

TheoreticalRates select_mus(const PhysicalParams& params, const DelaySpec& delays, const DampingSpec& damping,
                            const GainConfig& gains, double mu4_cap) {
    if (!(mu4_cap > 0 && mu4_cap < 1)) throw std::invalid_argument("mu4 cap must lie in (0, 1)");
    auto gr = validate_gains(params, gains, delays);
    if (!gr.all_pass())
        throw InfeasibleRates(gr.first_failure(), "gain conditions fail: " + gr.first_failure());
    for (int i = 0; i < 3; ++i)
        if (!(damping[i].a0 > 0)) throw InfeasibleRates(ch_id("damping_floor_positive", i), "damping floor must be positive");

    const double mu0_max =
        0.5 * std::min({damping[0].a0 / params.rho1h1, damping[1].a0 / params.rho3h3, damping[2].a0 / params.rhoh});

    auto mus_for = [&](double mu0) {
        std::array<double, 3> mu{};
        for (int i = 0; i < 3; ++i) mu[i] = 2.0 * mu0 * delays[i].M / (1.0 - delays[i].d);
        return mu;
    };
    // empty string means feasible, otherwise the binding constraint
    auto check = [&](double mu0) -> std::string {
        const auto mu = mus_for(mu0);
        if (!(mu4_of(mu0, mu, params) <= mu4_cap)) return "mu4_cap";
        for (int i = 0; i < 3; ++i) {
            const auto P = pi_matrix(i, delays[i].d, mu0, mu[i], params, gains);
            const bool ok = gains.beta[i] == 0.0 ? P.m11 < 0 : is_negative_definite(P);
            if (!ok) return ch_id("pi_negative_definite", i);
        }
        if (!(lambda_of(mu0, params, damping) > 0)) return "lambda_positive";
        return {};
    };

    double mu0 = mu0_max;
    int steps = 0;
    std::string binding = check(mu0);
    if (!binding.empty()) {
        double lo = 0.0, hi = mu0_max;
        for (steps = 1; steps <= 60; ++steps) {
            const double mid = 0.5 * (lo + hi);
            const auto b = check(mid);
            if (b.empty()) {
                lo = mid;
            } else {
                hi = mid;
                binding = b;
            }
        }
        if (lo == 0.0) throw InfeasibleRates(binding, "no feasible mu set after 60 bisection steps; binding: " + binding);
        mu0 = lo;
        steps = 60;
    }

    TheoreticalRates r;
    r.mu0 = mu0;
    r.mu = mus_for(mu0);
    r.mu4 = mu4_of(mu0, r.mu, params);
    r.mu4_mass_reading = r.mu4;
    if (params.layers) {
        const auto& ly = *params.layers;
        const double pi2 = std::numbers::pi * std::numbers::pi, L2 = params.L * params.L;
        r.mu4_layer_reading = std::max({mu0, mu0 * ly.rho[0] * L2 / (ly.E[0] * pi2), mu0 * ly.rho[2] * L2 / (ly.E[2] * pi2),
                                        mu0 * params.rhoh * L2 * L2 / (params.EI * pi2 * pi2), r.mu[0], r.mu[1], r.mu[2]});
    } else {
        r.mu4_layer_reading = std::numeric_limits<double>::quiet_NaN();
    }
    r.mu4_sharp = mu4_with(mu0, r.mu, params, 4.0);
    r.lambda = lambda_of(mu0, params, damping);
    r.zeta = (1.0 + r.mu4) / (1.0 - r.mu4);
    r.bisection_steps = steps;
    return r;
}

double decay_bound(double t, double E0, const TheoreticalRates& rates) {
    return rates.zeta * std::exp(-rates.lambda * t / (1.0 + rates.mu4)) * E0;
}

}  // namespace sandwich
