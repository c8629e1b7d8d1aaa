#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "sandwich/model.hpp"

using namespace sandwich;

namespace {

PhysicalParams unit_params() { return PhysicalParams{}; }

DelaySpec constant_delays(double tau, double M, double d) {
    DelaySpec s;
    for (int i = 0; i < 3; ++i) s[i] = DelayChannel{ConstantDelay{tau}, tau, M, d};
    return s;
}

DampingSpec constant_damping(double a) {
    DampingSpec s;
    for (int i = 0; i < 3; ++i) s[i] = DampingChannel{ConstantDamping{a}, a};
    return s;
}

// threshold written out from the gain condition, independent of gain_threshold
double direct_threshold(double C, double beta, double d) {
    return std::abs(beta) * (C * C + 1.0 - d) / (2.0 * C * (1.0 - d));
}

}  // namespace

TEST_CASE("gain condition with zero delayed gain reduces to positive alpha") {
    GainConfig g;
    g.alpha = {1, 1, 1};
    PhysicalParams p = unit_params();
    p.E1h1 = 3.7;
    const auto rep = validate_gains(p, g, constant_delays(1, 1, 0));
    REQUIRE(rep.entries.size() == 3);
    CHECK(rep.entries[0].pass);
    CHECK(rep.entries[0].rhs == 0.0);
}

TEST_CASE("gain condition is strict at the threshold") {
    GainConfig g;
    g.beta = {0.1, 0, 0};
    g.alpha = {0.1, 1, 1};
    CHECK(gain_threshold(1.0, 0.1, 0.0) == doctest::Approx(0.1).epsilon(1e-15));
    auto rep = validate_gains(unit_params(), g, constant_delays(1, 1, 0));
    CHECK_FALSE(rep.entries[0].pass);
    CHECK(rep.first_failure() == "gain_1");
    g.alpha[0] = 0.11;
    rep = validate_gains(unit_params(), g, constant_delays(1, 1, 0));
    CHECK(rep.entries[0].pass);
    CHECK(rep.entries[0].margin == doctest::Approx(0.01));
}

TEST_CASE("gain threshold for the second channel") {
    PhysicalParams p = unit_params();
    p.E3h3 = 2;
    GainConfig g;
    g.alpha = {1, 0.5, 1};
    g.beta = {0, 0.2, 0};
    const auto rep = validate_gains(p, g, constant_delays(1, 1, 0.5));
    CHECK(rep.entries[1].rhs == doctest::Approx(0.45).epsilon(1e-14));
    CHECK(rep.entries[1].pass);
}

TEST_CASE("delay derivative bound of one is outside the theory") {
    GainConfig g;
    g.alpha = {1, 1, 1};
    auto delays = constant_delays(1, 1, 0);
    delays[0].d = 1.0;
    try {
        validate_gains(unit_params(), g, delays);
        FAIL("expected a violation");
    } catch (const HypothesisViolation& e) {
        CHECK(e.condition_id == "delay_rate_bound_1");
    }
    const auto rep = validate_delays(delays);
    CHECK(rep.first_failure() == "delay_rate_bound_1");
}

TEST_CASE("phi matrix entries") {
    GainConfig g;
    g.alpha = {1, 1, 2};
    auto m = phi_matrix(0, 0.0, unit_params(), g);
    CHECK(m.m11 == -2.0);
    CHECK(m.m12 == 0.0);
    CHECK(m.m22 == 0.0);
    g.beta = {1, 0, 0.5};
    m = phi_matrix(0, 0.0, unit_params(), g);
    CHECK(m.m11 == -1.0);
    CHECK(m.m12 == -1.0);
    CHECK(m.m22 == -1.0);
    m = phi_matrix(2, 0.5, unit_params(), g);
    CHECK(m.m11 == doctest::Approx(-3.5));
    CHECK(m.m12 == doctest::Approx(-0.5));
    CHECK(m.m22 == doctest::Approx(-0.25));
}

TEST_CASE("negative definiteness by Sylvester") {
    CHECK_FALSE(is_negative_definite({-2, 0, 0}));
    CHECK(is_negative_definite({-1, 0, -1}));
    CHECK_FALSE(is_negative_definite({-1, 2, -1}));
}

TEST_CASE("decay bound values") {
    TheoreticalRates r;
    r.zeta = 2;
    r.lambda = 1;
    r.mu4 = 0;
    CHECK(decay_bound(0, 3.0, r) == doctest::Approx(6.0));
    CHECK(decay_bound(5, 0.0, r) == 0.0);
    CHECK(decay_bound(std::log(2.0), 1.0, r) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("decay bound is monotone in t and homogeneous in E0") {
    TheoreticalRates r;
    r.zeta = 3;
    r.lambda = 0.4;
    r.mu4 = 0.3;
    double prev = decay_bound(0, 1, r);
    for (double t = 0.1; t < 20; t += 0.1) {
        const double b = decay_bound(t, 1, r);
        CHECK(b <= prev);
        CHECK(decay_bound(t, 7.5, r) == doctest::Approx(7.5 * b).epsilon(1e-14));
        prev = b;
    }
}

TEST_CASE("random draws: gain report matches a direct evaluation of the threshold and passing draws give negative definite phi") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(0, 1);
    int passing = 0;
    for (int k = 0; k < 1000; ++k) {
        PhysicalParams p;
        p.E1h1 = 0.1 + 4 * U(rng);
        p.E3h3 = 0.1 + 4 * U(rng);
        p.EI = 0.1 + 4 * U(rng);
        GainConfig g;
        DelaySpec delays;
        for (int i = 0; i < 3; ++i) {
            g.alpha[i] = 3 * U(rng);
            g.beta[i] = (U(rng) < 0.1 ? 0.0 : 2 * U(rng) - 1);
            delays[i] = DelayChannel{ConstantDelay{1}, 1, 1, 0.95 * U(rng)};
        }
        const auto rep = validate_gains(p, g, delays);
        for (int i = 0; i < 3; ++i) {
            const double rhs = direct_threshold(p.flux_coefficient(i), g.beta[i], delays[i].d);
            CHECK(std::abs(rep.entries[i].rhs - rhs) <= 1e-12 * std::max(1.0, rhs));
            CHECK(rep.entries[i].pass == (g.alpha[i] > rhs));
        }
        if (!rep.all_pass()) continue;
        ++passing;
        for (int i = 0; i < 3; ++i) {
            if (g.beta[i] == 0.0) continue;  // semidefinite without a delayed state
            for (double s : {0.0, 0.25, 0.5, 0.75, 1.0})
                CHECK(is_negative_definite(phi_matrix(i, s * delays[i].d, p, g)));
        }
    }
    CHECK(passing > 20);
}

TEST_CASE("physical parameter checks") {
    PhysicalParams p;
    CHECK_NOTHROW(p.validate());
    p.k = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    LayerInputs ly;
    ly.rho = {1, 2, 3};
    ly.h = {0.1, 0.2, 0.3};
    ly.E = {4, 5, 6};
    ly.I = {0.01, 0.02, 0.03};
    const auto q = PhysicalParams::from_layers(ly, 1.5, 2.0);
    CHECK_NOTHROW(q.validate());
    CHECK(q.rhoh == doctest::Approx(0.1 + 0.4 + 0.9));
    CHECK(q.EI == doctest::Approx(4 * 0.01 + 6 * 0.03));
    CHECK(q.alpha == doctest::Approx(0.2 + 0.2));
    auto bad = q;
    bad.EI *= 1 + 1e-9;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(q.c_min() == doctest::Approx(std::min(std::sqrt(4.0 / 1.0), std::sqrt(6.0 / 3.0))));
}

TEST_CASE("delay and damping closed forms") {
    const SinusoidalDelay s{0.5, 0.25, 2.0};
    CHECK(tau_min(s) == doctest::Approx(0.25));
    CHECK(tau_max(s) == doctest::Approx(0.75));
    CHECK(tau_rate_max(s) == doctest::Approx(0.5));
    CHECK(tau_rate(s, 0.3) == doctest::Approx(0.5 * std::cos(0.6)));
    DelaySpec d;
    for (int i = 0; i < 3; ++i) d[i] = DelayChannel{s, 0.25, 0.75, 0.5};
    CHECK(validate_delays(d).all_pass());
    d[1].M = 0.7;
    CHECK(validate_delays(d).first_failure() == "delay_upper_2");

    DampingSpec a;
    for (int i = 0; i < 3; ++i) a[i] = DampingChannel{ExponentialDamping{0.5, 2.0, 1.0}, 0.5};
    CHECK(validate_damping(a).all_pass());
    CHECK(a[0](0.0) == doctest::Approx(2.0));
    a[2] = DampingChannel{ExponentialDamping{2.0, 0.5, 1.0}, 0.5};  // increasing
    CHECK(validate_damping(a).first_failure() == "damping_monotone_3");
}

namespace {

// Every stated inequality for a rates object, recomputed from the inputs.
void check_rates(const TheoreticalRates& r, const PhysicalParams& p, const DelaySpec& delays,
                 const DampingSpec& damping, const GainConfig& g) {
    CHECK(r.mu0 > 0);
    CHECK(r.mu4 < 1);
    for (int i = 0; i < 3; ++i) CHECK(r.mu0 * delays[i].M / (1 - delays[i].d) < r.mu[i]);
    CHECK(r.mu0 < std::min({damping[0].a0 / p.rho1h1, damping[1].a0 / p.rho3h3, damping[2].a0 / p.rhoh}));
    CHECK(r.lambda > 0);
    CHECK(r.lambda <= r.mu0 + 1e-15);
    CHECK(r.lambda <= 2 * (damping[0].a0 / p.rho1h1 - r.mu0) + 1e-15);
    CHECK(r.lambda <= 2 * (damping[1].a0 / p.rho3h3 - r.mu0) + 1e-15);
    CHECK(r.lambda <= 2 * (damping[2].a0 / p.rhoh - r.mu0) + 1e-15);
    const double pi2 = std::numbers::pi * std::numbers::pi, L2 = p.L * p.L;
    const double mu4 = std::max({r.mu0, r.mu0 * p.rho1h1 * L2 / (p.E1h1 * pi2), r.mu0 * p.rho3h3 * L2 / (p.E3h3 * pi2),
                                 r.mu0 * p.rhoh * L2 * L2 / (p.EI * pi2 * pi2), r.mu[0], r.mu[1], r.mu[2]});
    CHECK(r.mu4 == doctest::Approx(mu4).epsilon(1e-14));
    CHECK(r.zeta == doctest::Approx((1 + r.mu4) / (1 - r.mu4)).epsilon(1e-14));
    for (int i = 0; i < 3; ++i) {
        const auto P = pi_matrix(i, delays[i].d, r.mu0, r.mu[i], p, g);
        if (g.beta[i] == 0.0)
            CHECK(P.m11 < 0);
        else
            CHECK(is_negative_definite(P));
    }
}

}  // namespace

TEST_CASE("select_mus without delayed gains is feasible and agrees with a grid search") {
    const auto p = unit_params();
    const auto delays = constant_delays(1, 1, 0);
    const auto damping = constant_damping(1);
    GainConfig g;
    g.alpha = {1, 1, 1};
    const auto r = select_mus(p, delays, damping, g);
    check_rates(r, p, delays, damping, g);

    // dense search over (mu0, mu_i) in (0,1)^2 with the same inequalities
    int feasible = 0;
    double best_mu0 = 0;
    for (int a = 1; a < 200; ++a)
        for (int b = 1; b < 200; ++b) {
            const double mu0 = a / 200.0, mu = b / 200.0;
            const std::array<double, 3> mus{mu, mu, mu};
            if (!(mu0 * 1.0 / 1.0 < mu)) continue;
            if (!(mu4_of(mu0, mus, p) < 1)) continue;
            if (!(lambda_of(mu0, p, damping) > 0)) continue;
            bool ok = true;
            for (int i = 0; i < 3; ++i) ok = ok && pi_matrix(i, 0, mu0, mu, p, g).m11 < 0;
            if (!ok) continue;
            ++feasible;
            best_mu0 = std::max(best_mu0, mu0);
        }
    CHECK(feasible > 0);
    CHECK(r.mu0 <= best_mu0 + 1.0 / 200);
}

TEST_CASE("select_mus on the delayed configuration") {
    const auto p = unit_params();
    DelaySpec delays;
    for (int i = 0; i < 3; ++i) delays[i] = DelayChannel{SinusoidalDelay{0.5, 0.25, 2.0}, 0.25, 0.75, 0.5};
    const auto damping = constant_damping(1);
    GainConfig g;
    g.alpha = {1.5, 1.5, 1.5};
    g.beta = {0.5, 0.5, 0.5};
    const auto r = select_mus(p, delays, damping, g);
    check_rates(r, p, delays, damping, g);
    CHECK(r.mu4 <= 0.5);
    CHECK(r.decay_exponent() == doctest::Approx(r.lambda / (1 + r.mu4)));
}

TEST_CASE("lambda shrinks with the damping floor") {
    const auto p = unit_params();
    const auto delays = constant_delays(1, 1, 0);
    GainConfig g;
    g.alpha = {1, 1, 1};
    double prev = std::numeric_limits<double>::infinity();
    for (double a0 : {1.0, 0.1, 1e-2, 1e-4, 1e-8}) {
        const auto r = select_mus(p, delays, constant_damping(a0), g);
        CHECK(r.lambda > 0);
        CHECK(r.lambda < prev);
        prev = r.lambda;
    }
    CHECK(prev < 1e-7);
}

TEST_CASE("small mu limit") {
    const auto p = unit_params();
    const std::array<double, 3> tiny{1e-12, 1e-12, 1e-12};
    const double mu4 = mu4_of(1e-12, tiny, p);
    CHECK(mu4 < 1e-11);
    CHECK((1 + mu4) / (1 - mu4) == doctest::Approx(1.0));
}

TEST_CASE("select_mus reports infeasibility with a binding constraint") {
    GainConfig g;
    g.alpha = {0.1, 1, 1};
    g.beta = {1, 0, 0};
    try {
        select_mus(unit_params(), constant_delays(1, 1, 0), constant_damping(1), g);
        FAIL("expected infeasible");
    } catch (const InfeasibleRates& e) {
        CHECK(e.binding_constraint == "gain_1");
    }
    g.alpha = {1, 1, 1};
    g.beta = {0, 0, 0};
    CHECK_THROWS_AS(select_mus(unit_params(), constant_delays(1, 1, 0), constant_damping(0), g), InfeasibleRates);
    CHECK_THROWS_AS(select_mus(unit_params(), constant_delays(1, 1, 0), constant_damping(1), g, 1.0),
                    std::invalid_argument);
}
