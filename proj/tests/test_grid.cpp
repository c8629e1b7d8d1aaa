#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "sandwich/delay_line.hpp"
#include "sandwich/grid.hpp"
#include "sandwich/initial_data.hpp"
#include "sandwich/io.hpp"

using namespace sandwich;

namespace {

const Variant kVariants[] = {Variant::StabilizedDelayed, Variant::ControlledConservative};

double energy_of(const SemiDiscreteSystem& sys, const Eigen::VectorXd& q) { return q.dot(sys.K * q); }

Eigen::VectorXd nodal(const SemiDiscreteSystem& sys, double (*u)(double), double (*v)(double), double (*w)(double)) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(sys.size());
    sample_fields(sys, q, [&](int f, double x) { return f == 0 ? u(x) : f == 1 ? v(x) : w(x); });
    return q;
}

double zero(double) { return 0; }
double lin(double x) { return x; }
double sq(double x) { return x * x; }
double quarter_sine(double x) { return std::sin(std::numbers::pi * x / 2); }

}  // namespace

TEST_CASE("grid basics") {
    const Grid1D g(10, 2.5);
    CHECK(g.dx * g.N == 2.5);
    CHECK(g.x(10) == 2.5);
    CHECK_THROWS(Grid1D(7, 1.0));
    CHECK_THROWS(Grid1D(16, 0.0));
}

TEST_CASE("layouts eliminate exactly the essential nodes") {
    const DofLayout a(Variant::StabilizedDelayed, 16);
    CHECK(a.n_u == 16);
    CHECK(a.n_v == 16);
    CHECK(a.n_w == 15);
    CHECK(a.iu(0) == -1);
    CHECK(a.iw(0) == -1);
    CHECK(a.iw(16) == -1);
    const DofLayout b(Variant::ControlledConservative, 16);
    CHECK(b.n_w == 17);
    CHECK(b.iw(0) >= 0);
    CHECK(b.trace(0) == b.iu(16));
    CHECK(b.trace(2) == b.iw(16));
    // every retained index appears once
    for (const auto* l : {&a, &b}) {
        std::vector<int> seen(l->size(), 0);
        for (int j = 0; j <= 16; ++j)
            for (int idx : {l->iu(j), l->iv(j), l->iw(j)})
                if (idx >= 0) ++seen[idx];
        for (int s : seen) CHECK(s == 1);
    }
}

TEST_CASE("stiffness is exactly symmetric and positive semidefinite") {
    std::mt19937_64 rng(11);
    for (Variant v : kVariants) {
        const auto sys = build_system(Grid1D(24, 1.3), PhysicalParams{}, v);
        const Eigen::MatrixXd K(sys.K);
        CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK((sys.M.array() > 0).all());
        for (int k = 0; k < 100; ++k) {
            Eigen::VectorXd q(sys.size());
            for (int i = 0; i < q.size(); ++i) q[i] = uniform_pm1(rng);
            CHECK(energy_of(sys, q) >= -1e-12 * q.squaredNorm());
        }
        CHECK(energy_of(sys, Eigen::VectorXd::Zero(sys.size())) == 0.0);
    }
}

TEST_CASE("stiffness equals the sum of its strain terms") {
    std::mt19937_64 rng(5);
    for (Variant v : kVariants) {
        const auto sys = build_system(Grid1D(20, 1.0), PhysicalParams{}, v);
        Eigen::VectorXd q(sys.size());
        for (int i = 0; i < q.size(); ++i) q[i] = uniform_pm1(rng);
        double s = 0;
        for (int k = 0; k < 4; ++k) {
            const Eigen::VectorXd Bq = sys.strain[k] * q;
            s += sys.strain_coef[k] * (sys.strain_weight[k].array() * Bq.array().square()).sum();
        }
        CHECK(energy_of(sys, q) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("linear longitudinal profile, conservative layout") {
    // E1h1 int u_x^2 + k int u^2 = 1 + 1/3
    double prev = 0;
    for (int N : {16, 32, 64}) {
        const auto sys = build_system(Grid1D(N, 1.0), PhysicalParams{}, Variant::ControlledConservative);
        const double err = std::abs(energy_of(sys, nodal(sys, lin, zero, zero)) - 4.0 / 3.0);
        CHECK(err <= 0.5 * sys.grid.dx * sys.grid.dx);
        if (prev > 0) CHECK(std::log2(prev / err) == doctest::Approx(2.0).epsilon(0.05));
        prev = err;
    }
}

TEST_CASE("quadratic beam profile, conservative layout") {
    // EI int w_xx^2 + k alpha^2 int w_x^2 = 4 + 4/3; w = x^2 breaks the
    // natural condition w_xx(L) = 0, so the boundary row costs one order
    double prev = 0;
    for (int N : {16, 32, 64, 128}) {
        const auto sys = build_system(Grid1D(N, 1.0), PhysicalParams{}, Variant::ControlledConservative);
        const double err = std::abs(energy_of(sys, nodal(sys, zero, zero, sq)) - 16.0 / 3.0);
        CHECK(err <= 4.0 * sys.grid.dx);
        if (prev > 0) CHECK(std::log2(prev / err) >= 0.9);
        prev = err;
    }
}

TEST_CASE("discrete energy converges at second order for a compatible smooth field") {
    // u = sin(pi x / 2): u(0) = 0, u_x(1) = 0; E = 1/2 (pi^2/8 + 1/2)
    const double exact = 0.5 * (std::numbers::pi * std::numbers::pi / 8 + 0.5);
    double prev = 0;
    for (int N : {16, 32, 64, 128}) {
        const auto sys = build_system(Grid1D(N, 1.0), PhysicalParams{}, Variant::StabilizedDelayed);
        DiscreteState s = DiscreteState::zero(sys);
        s.q = nodal(sys, quarter_sine, zero, zero);
        const double err = std::abs(quadratic_energy(s, sys) - exact);
        if (prev > 0) {
            const double order = std::log2(prev / err);
            CHECK(order >= 1.7);
            CHECK(order <= 2.3);
        }
        prev = err;
    }
}

TEST_CASE("energy with a constant delayed history") {
    const auto sys = build_system(Grid1D(16, 1.0), PhysicalParams{}, Variant::StabilizedDelayed);
    DelaySpec delays;
    for (int i = 0; i < 3; ++i) delays[i] = DelayChannel{ConstantDelay{0.4}, 0.4, 0.4, 0};
    GainConfig g;
    g.beta = {0.6, 0, 0};
    TraceHistory h;
    for (int i = 0; i < 3; ++i) {
        h.init_channel(i, [](double) { return 1.5; }, 0.4);
        h.push(i, 0.0, 1.5);
    }
    const auto s = DiscreteState::zero(sys);
    for (auto quad : {DelayQuadrature::Cells, DelayQuadrature::Interpolant, DelayQuadrature::Trapezoid32})
        CHECK(discrete_energy(s, sys, &h, delays, g, quad) == doctest::Approx(0.5 * 0.6 * 0.4 * 2.25).epsilon(1e-13));

    TraceHistory z;
    for (int i = 0; i < 3; ++i) {
        z.init_channel(i, [](double) { return 0.0; }, 0.4);
        z.push(i, 0.0, 0.0);
    }
    CHECK(discrete_energy(s, sys, &z, delays, g) == 0.0);
    CHECK_THROWS(discrete_energy(s, sys, nullptr, delays, g));
}

TEST_CASE("state norm: zero, homogeneity, relation to the quadratic energy") {
    std::mt19937_64 rng(9);
    for (Variant v : kVariants) {
        const auto sys = build_system(Grid1D(32, 1.0), PhysicalParams{}, v);
        CHECK(hspace_norm(DiscreteState::zero(sys), sys) == 0.0);
        const auto s = random_smooth_state(sys, rng, 5);
        const double n = hspace_norm(s, sys);
        CHECK(n == doctest::Approx(std::sqrt(2 * quadratic_energy(s, sys))).epsilon(1e-14));
        DiscreteState t = s;
        t.q *= -2.5;
        t.p *= -2.5;
        t.moment *= -2.5;
        CHECK(hspace_norm(t, sys) == doctest::Approx(2.5 * n).epsilon(1e-13));
        // dense assembly of the same quadratic form
        const Eigen::MatrixXd K(sys.K);
        const double dense = s.p.dot(sys.M.asDiagonal() * s.p) + s.q.dot(K * s.q) +
                             2 * sys.moment_weight * s.moment * s.moment;
        CHECK(n * n == doctest::Approx(dense).epsilon(1e-12));
    }
}

TEST_CASE("trace velocities carry exactly the flux coefficients as masses") {
    PhysicalParams p;
    p.E1h1 = 2.0;
    p.E3h3 = 3.0;
    p.alpha = 0.7;
    p.k = 1.9;
    const auto sys = build_system(Grid1D(16, 1.0), p, Variant::ControlledConservative);
    const double expect[3] = {2.0, 3.0, 0.7 * 1.9};
    for (int i = 0; i < 3; ++i) {
        const int t = sys.layout.trace(i);
        CHECK(sys.M[t] - sys.M_field[t] == doctest::Approx(expect[i]).epsilon(1e-15));
        DiscreteState s = DiscreteState::zero(sys);
        const double before = std::pow(hspace_norm(s, sys), 2);
        s.p[t] += 0.3;
        const double after = std::pow(hspace_norm(s, sys), 2);
        CHECK(after - before == doctest::Approx(sys.M[t] * 0.09).epsilon(1e-14));
    }
}

TEST_CASE("matrix export") {
    const auto sys = build_system(Grid1D(8, 1.0), PhysicalParams{}, Variant::StabilizedDelayed);
    const auto path = std::filesystem::temp_directory_path() / "sandwich_K.mtx";
    write_matrix_market(path.string(), sys.K);
    const auto text = read_file(path);
    CHECK(text.rfind("%%MatrixMarket matrix coordinate real", 0) == 0);
    std::filesystem::remove(path);
}
