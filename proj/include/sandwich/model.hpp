#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sandwich {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a hypothesis needed by the theory is violated (e.g. d >= 1).
class HypothesisViolation : public std::invalid_argument {
public:
    HypothesisViolation(std::string id, const std::string& what)
        : std::invalid_argument(what), condition_id(std::move(id)) {}
    std::string condition_id;
};

class InfeasibleRates : public std::runtime_error {
public:
    InfeasibleRates(std::string binding, const std::string& what)
        : std::runtime_error(what), binding_constraint(std::move(binding)) {}
    std::string binding_constraint;
};

struct LayerInputs {
    std::array<double, 3> rho{}, h{}, E{}, I{};
};

struct PhysicalParams {
    double rho1h1 = 1, E1h1 = 1, rho3h3 = 1, E3h3 = 1;
    double rhoh = 1, EI = 1, k = 1, alpha = 1, L = 1;
    std::optional<LayerInputs> layers;

    // Throws ConfigError on non-positive entries or inconsistent composites.
    void validate() const;

    // Composite coefficients built from layer-level data.
    static PhysicalParams from_layers(const LayerInputs& layers, double k, double L);

    // Boundary flux coefficients C1=E1h1, C2=E3h3, C3=EI (channel 1..3).
    double flux_coefficient(int channel) const;
    // Mass coefficient of the field attached to a channel.
    double mass_coefficient(int channel) const;
    // Slowest longitudinal wave speed.
    double c_min() const;
};

struct ConstantDelay {
    double tau;
};

// tau(t) = mean + amplitude * sin(frequency * t), frequency in rad per unit time.
struct SinusoidalDelay {
    double mean, amplitude, frequency;
};

using DelayFunction = std::variant<ConstantDelay, SinusoidalDelay>;

double tau_value(const DelayFunction& f, double t);
double tau_rate(const DelayFunction& f, double t);
double tau_min(const DelayFunction& f);
double tau_max(const DelayFunction& f);
double tau_rate_max(const DelayFunction& f);

struct DelayChannel {
    DelayFunction tau = ConstantDelay{1.0};
    double tau0 = 1.0;  // declared lower bound
    double M = 1.0;     // declared upper bound
    double d = 0.0;     // declared bound on the derivative

    double operator()(double t) const { return tau_value(tau, t); }
    double rate(double t) const { return tau_rate(tau, t); }
};

struct DelaySpec {
    std::array<DelayChannel, 3> ch;
    const DelayChannel& operator[](int i) const { return ch.at(i); }
    DelayChannel& operator[](int i) { return ch.at(i); }
    double min_tau0() const;
};

struct ConstantDamping {
    double a;
};

// a(t) = floor_value + (initial - floor_value) * exp(-rate * t)
struct ExponentialDamping {
    double floor_value, initial, rate;
};

using DampingFunction = std::variant<ConstantDamping, ExponentialDamping>;

struct DampingChannel {
    DampingFunction a = ConstantDamping{0.0};
    double a0 = 0.0;  // declared floor

    double operator()(double t) const;
    double sup() const;
};

struct DampingSpec {
    std::array<DampingChannel, 3> ch;
    const DampingChannel& operator[](int i) const { return ch.at(i); }
    DampingChannel& operator[](int i) { return ch.at(i); }
};

struct GainConfig {
    std::array<double, 3> alpha{0, 0, 0};
    std::array<double, 3> beta{0, 0, 0};
};

struct BoundaryQuadForm {
    double m11 = 0, m12 = 0, m22 = 0;
    int channel = 0;
    double det() const { return m11 * m22 - m12 * m12; }
    // x^T m y for 2-vectors
    double eval(double x1, double x2) const { return m11 * x1 * x1 + 2 * m12 * x1 * x2 + m22 * x2 * x2; }
};

struct HypothesisEntry {
    std::string condition_id;
    double lhs = 0, rhs = 0, margin = 0;
    bool pass = false;
};

struct HypothesisReport {
    std::vector<HypothesisEntry> entries;
    bool all_pass() const;
    const HypothesisEntry* find(const std::string& id) const;
    std::string first_failure() const;
};

struct TheoreticalRates {
    double mu0 = 0;
    std::array<double, 3> mu{0, 0, 0};
    double mu4 = 0;
    double lambda = 0;
    double zeta = 1;
    // Alternative readings of the max defining mu4 (see README): the
    // mass-coefficient reading is used; the layer-level reading coincides
    // whenever layer data is present, and is NaN otherwise.
    double mu4_mass_reading = 0;
    double mu4_layer_reading = 0;
    // mu4 recomputed with the sharp Poincare constant 4L^2/pi^2 of a
    // one-sided Dirichlet interval; diagnostic only.
    double mu4_sharp = 0;
    int bisection_steps = 0;

    double decay_exponent() const { return lambda / (1.0 + mu4); }
};

// Threshold |beta|/(2C) * (C^2 + 1 - d)/(1 - d).
double gain_threshold(double C, double beta, double d);

HypothesisReport validate_gains(const PhysicalParams& params, const GainConfig& gains,
                                const DelaySpec& delays);

// Delay bound and damping checks, evaluated on the closed forms.
HypothesisReport validate_delays(const DelaySpec& delays);
HypothesisReport validate_damping(const DampingSpec& damping);

BoundaryQuadForm phi_matrix(int channel, double d, const PhysicalParams& params,
                            const GainConfig& gains);

bool is_negative_definite(const BoundaryQuadForm& m);

// Perturbed boundary form used by the Lyapunov argument, evaluated at tau' = d.
BoundaryQuadForm pi_matrix(int channel, double d, double mu0, double mu_i,
                           const PhysicalParams& params, const GainConfig& gains);

// Young constant for the trace term: C_i * L / (4 eps), eps = 1/2.
double young_constant(int channel, const PhysicalParams& params);

// mu4 for a candidate (mu0, mu_i).
double mu4_of(double mu0, const std::array<double, 3>& mu, const PhysicalParams& params);
// lambda for a candidate mu0 (largest value allowed by the rate inequality).
double lambda_of(double mu0, const PhysicalParams& params, const DampingSpec& damping);

// Largest mu0 (bisection) keeping every Pi negative definite, lambda > 0
// and mu4 <= mu4_cap; mu_i = 2 mu0 M_i / (1 - d_i).  The cap keeps
// zeta = (1 + mu4)/(1 - mu4) bounded.
TheoreticalRates select_mus(const PhysicalParams& params, const DelaySpec& delays,
                            const DampingSpec& damping, const GainConfig& gains, double mu4_cap = 0.5);

double decay_bound(double t, double E0, const TheoreticalRates& rates);

}  // namespace sandwich
