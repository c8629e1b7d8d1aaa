#include "sandwich/grid.hpp"

#include <cmath>
#include <fstream>
#include <vector>

#include "sandwich/delay_line.hpp"
#include "sandwich/io.hpp"

namespace sandwich {

std::string to_string(Variant v) {
    return v == Variant::StabilizedDelayed ? "stabilized_delayed" : "controlled_conservative";
}

Variant variant_from_string(const std::string& s) {
    if (s == "stabilized_delayed" || s == "A") return Variant::StabilizedDelayed;
    if (s == "controlled_conservative" || s == "B") return Variant::ControlledConservative;
    throw ConfigError("unknown variant '" + s + "'");
}

Grid1D::Grid1D(int N_, double L_) : N(N_), L(L_), dx(L_ / N_) {
    if (N < 8) throw std::invalid_argument("grid needs N >= 8");
    if (!(L > 0)) throw std::invalid_argument("grid length must be positive");
}

DofLayout::DofLayout(Variant v, int N_) : variant(v), N(N_) {
    n_u = N;
    n_v = N;
    if (v == Variant::StabilizedDelayed) {
        n_w = N - 1;
        w_first = 1;
    } else {
        n_w = N + 1;
        w_first = 0;
    }
    u_off = 0;
    v_off = n_u;
    w_off = n_u + n_v;
}

int DofLayout::iw(int j) const {
    if (variant == Variant::StabilizedDelayed) return j >= 1 && j <= N - 1 ? w_off + j - 1 : -1;
    return j >= 0 && j <= N ? w_off + j : -1;
}

int DofLayout::field_of(int dof) const {
    if (dof < v_off) return 0;
    if (dof < w_off) return 1;
    return 2;
}

int DofLayout::trace(int channel) const {
    if (variant != Variant::ControlledConservative) throw std::logic_error("trace dofs exist only in the controlled variant");
    switch (channel) {
        case 0: return iu(N);
        case 1: return iv(N);
        case 2: return iw(N);
    }
    throw std::out_of_range("channel index must be 0..2");
}

namespace {

using Trip = Eigen::Triplet<double>;

void add(std::vector<Trip>& t, int row, int col, double v) {
    if (col >= 0) t.emplace_back(row, col, v);
}

SpMat make(int rows, int cols, const std::vector<Trip>& t) {
    SpMat A(rows, cols);
    A.setFromTriplets(t.begin(), t.end());
    return A;
}

}  // namespace

Eigen::VectorXd SemiDiscreteSystem::damping_diagonal(const std::array<double, 3>& a) const {
    Eigen::VectorXd c(size());
    for (int i = 0; i < size(); ++i) c[i] = a[layout.field_of(i)] * weight[i];
    return c;
}

double SemiDiscreteSystem::kinetic_l2_sq(const Eigen::VectorXd& p) const {
    return (weight.array() * p.array().square()).sum();
}

double SemiDiscreteSystem::field_cross(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const {
    return (M_field.array() * q.array() * p.array()).sum();
}

SemiDiscreteSystem build_system(const Grid1D& grid, const PhysicalParams& params, Variant variant) {
    params.validate();
    const int N = grid.N;
    const double dx = grid.dx;
    SemiDiscreteSystem sys{grid, params, DofLayout(variant, N), {}, {}, {}, {}, {}, {}, {}, {}, 0.0, {}, {}, 0.0};
    const auto& lay = sys.layout;
    const int n = lay.size();

    // quadrature weights
    sys.weight = Eigen::VectorXd::Constant(n, dx);
    sys.weight[lay.iu(N)] = 0.5 * dx;
    sys.weight[lay.iv(N)] = 0.5 * dx;
    if (variant == Variant::ControlledConservative) {
        sys.weight[lay.iw(0)] = 0.5 * dx;
        sys.weight[lay.iw(N)] = 0.5 * dx;
    }
    sys.M_field.resize(n);
    for (int i = 0; i < n; ++i) sys.M_field[i] = params.mass_coefficient(lay.field_of(i)) * sys.weight[i];
    sys.M = sys.M_field;

    // strain operators
    std::vector<Trip> tu, tv, tw, ts;
    for (int j = 0; j < N; ++j) {
        add(tu, j, lay.iu(j + 1), 1.0 / dx);
        add(tu, j, lay.iu(j), -1.0 / dx);
        add(tv, j, lay.iv(j + 1), 1.0 / dx);
        add(tv, j, lay.iv(j), -1.0 / dx);
        add(ts, j, lay.iu(j), -0.5);
        add(ts, j, lay.iu(j + 1), -0.5);
        add(ts, j, lay.iv(j), 0.5);
        add(ts, j, lay.iv(j + 1), 0.5);
        add(ts, j, lay.iw(j + 1), params.alpha / dx);
        add(ts, j, lay.iw(j), -params.alpha / dx);
    }
    const double h2 = 1.0 / (dx * dx);
    // nodal curvature rows 0..N-1; row 0 uses the ghost node of w_x(0)=0,
    // node N carries no curvature sample (natural moment condition).
    add(tw, 0, lay.iw(1), 2.0 * h2);
    add(tw, 0, lay.iw(0), -2.0 * h2);
    for (int j = 1; j < N; ++j) {
        add(tw, j, lay.iw(j - 1), h2);
        add(tw, j, lay.iw(j), -2.0 * h2);
        add(tw, j, lay.iw(j + 1), h2);
    }
    sys.strain[0] = make(N, n, tu);
    sys.strain[1] = make(N, n, tv);
    sys.strain[2] = make(N, n, tw);
    sys.strain[3] = make(N, n, ts);
    sys.strain_coef = {params.E1h1, params.E3h3, params.EI, params.k};
    for (int s = 0; s < 4; ++s) sys.strain_weight[s] = Eigen::VectorXd::Constant(N, dx);
    sys.strain_weight[2][0] = 0.5 * dx;

    SpMat K(n, n);
    for (int s = 0; s < 4; ++s) {
        const SpMat& B = sys.strain[s];
        SpMat WB = (sys.strain_coef[s] * sys.strain_weight[s]).asDiagonal() * B;
        K += SpMat(B.transpose() * WB);
    }
    SpMat Kt = K.transpose();
    sys.K = 0.5 * (K + Kt);
    sys.K.prune(0.0);

    for (auto& g : sys.g) g = Eigen::VectorXd::Zero(n);
    sys.wmean = Eigen::VectorXd::Zero(n);
    if (variant == Variant::StabilizedDelayed) {
        sys.g[0][lay.iu(N)] = 1.0;
        sys.g[1][lay.iv(N)] = 1.0;
        // ghost node w_{N+1} = -w_{N-1} + dx^2 m puts the moment on node N-1
        sys.g[2][lay.iw(N - 1)] = -1.0 / dx;
        sys.moment_weight = 0.25 * params.EI * dx;
        sys.flux = {params.E1h1, params.E3h3, params.EI};
    } else {
        sys.flux = {params.E1h1, params.E3h3, params.alpha * params.k};
        for (int c = 0; c < 3; ++c) {
            const int d = lay.trace(c);
            sys.g[c][d] = 1.0;
            sys.M[d] += sys.flux[c];
        }
        double mw = 0;
        for (int j = 0; j <= N; ++j) mw += sys.M[lay.iw(j)];
        for (int j = 0; j <= N; ++j) sys.wmean[lay.iw(j)] = sys.M[lay.iw(j)] / mw;
        const double c = params.c_min() / params.L;
        sys.kappa = mw * c * c;
    }
    return sys;
}

DiscreteState DiscreteState::zero(const SemiDiscreteSystem& sys, double t) {
    return {Eigen::VectorXd::Zero(sys.size()), Eigen::VectorXd::Zero(sys.size()), t, 0.0};
}

bool DiscreteState::finite() const { return q.allFinite() && p.allFinite() && std::isfinite(moment); }

double delay_integral(const TraceHistory& h, int i, double t, const DelaySpec& delays, DelayQuadrature quad) {
    const double tau = delays[i](t);
    if (quad == DelayQuadrature::Cells) return h.cell_integral_sq(i, t - tau, t);
    if (quad == DelayQuadrature::Interpolant) return h.integral_sq(i, t - tau, t);
    const int n = 32;
    const auto z = z_profile(h, i, t, delays, n);
    double s = 0;
    for (int k = 0; k <= n; ++k) s += (k == 0 || k == n ? 0.5 : 1.0) * z[k] * z[k];
    return tau * s / n;
}

double delay_weighted_integral(const TraceHistory& h, int i, double t, const DelaySpec& delays,
                               DelayQuadrature quad) {
    const double tau = delays[i](t);
    if (quad == DelayQuadrature::Cells) return h.cell_integral_sq_ramp(i, t - tau, t);
    if (quad == DelayQuadrature::Interpolant) return h.integral_sq_ramp(i, t - tau, t);
    const int n = 32;
    const auto z = z_profile(h, i, t, delays, n);
    double s = 0;
    for (int k = 0; k <= n; ++k) {
        const double rho = static_cast<double>(k) / n;
        s += (k == 0 || k == n ? 0.5 : 1.0) * (1.0 - rho) * z[k] * z[k];
    }
    return tau * s / n;
}

double quadratic_energy(const DiscreteState& s, const SemiDiscreteSystem& sys) {
    return 0.5 * ((sys.M.array() * s.p.array().square()).sum() + s.q.dot(sys.K * s.q)) +
           sys.moment_weight * s.moment * s.moment;
}

double discrete_energy(const DiscreteState& s, const SemiDiscreteSystem& sys, const TraceHistory* history,
                       const DelaySpec& delays, const GainConfig& gains, DelayQuadrature quad) {
    double E = quadratic_energy(s, sys);
    if (sys.variant() != Variant::StabilizedDelayed) return E;
    for (int i = 0; i < 3; ++i) {
        if (gains.beta[i] == 0.0) continue;
        if (!history) throw std::invalid_argument("delay history required for the delayed energy");
        E += 0.5 * std::abs(gains.beta[i]) * delay_integral(*history, i, s.t, delays, quad);
    }
    return E;
}

double hspace_norm(const DiscreteState& s, const SemiDiscreteSystem& sys) {
    return std::sqrt(std::max(0.0, 2.0 * quadratic_energy(s, sys)));
}

double augmented_inner(const DiscreteState& a, const DiscreteState& b, const SemiDiscreteSystem& sys) {
    return (sys.M.array() * a.p.array() * b.p.array()).sum() + a.q.dot(sys.K * b.q) +
           2.0 * sys.moment_weight * a.moment * b.moment +
           sys.kappa * sys.wmean.dot(a.q) * sys.wmean.dot(b.q);
}

double augmented_norm(const DiscreteState& s, const SemiDiscreteSystem& sys) {
    return std::sqrt(std::max(0.0, augmented_inner(s, s, sys)));
}

void write_matrix_market(const std::string& path, const SpMat& A) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
    for (int c = 0; c < A.outerSize(); ++c)
        for (SpMat::InnerIterator it(A, c); it; ++it)
            out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << format_number(it.value()) << '\n';
}

void write_matrix_market(const std::string& path, const Eigen::VectorXd& diag) {
    SpMat D(diag.size(), diag.size());
    std::vector<Trip> t;
    for (int i = 0; i < diag.size(); ++i) t.emplace_back(i, i, diag[i]);
    D.setFromTriplets(t.begin(), t.end());
    write_matrix_market(path, D);
}

}  // namespace sandwich
