#pragma once

#include <array>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "sandwich/model.hpp"

namespace sandwich {

class TraceHistory;

enum class Variant { StabilizedDelayed, ControlledConservative };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct Grid1D {
    int N;
    double L;
    double dx;

    Grid1D(int N, double L);
    double x(int j) const { return j == N ? L : j * dx; }
};

// Field nodes and their global indices.  Eliminated nodes map to -1.
// Variant A keeps u_1..u_N, v_1..v_N, w_1..w_{N-1}.
// Variant B keeps u_1..u_N, v_1..v_N, w_0..w_N; the boundary traces
// Psi4..Psi6 are the last u, v, w nodes.
struct DofLayout {
    Variant variant;
    int N = 0;
    int n_u = 0, n_v = 0, n_w = 0;
    int u_off = 0, v_off = 0, w_off = 0;
    int w_first = 0;  // first retained w node

    DofLayout() = default;
    DofLayout(Variant variant, int N);

    int size() const { return n_u + n_v + n_w; }
    int iu(int j) const { return j >= 1 && j <= N ? u_off + j - 1 : -1; }
    int iv(int j) const { return j >= 1 && j <= N ? v_off + j - 1 : -1; }
    int iw(int j) const;
    // Field (0=u, 1=v, 2=w) a dof belongs to.
    int field_of(int dof) const;
    // Trace dof of channel i (variant B only).
    int trace(int channel) const;
};

using SpMat = Eigen::SparseMatrix<double>;

struct SemiDiscreteSystem {
    Grid1D grid;
    PhysicalParams params;
    DofLayout layout;

    Eigen::VectorXd M;       // lumped mass, including trace masses in variant B
    Eigen::VectorXd M_field; // mass without the trace contributions
    Eigen::VectorXd weight;  // trapezoid quadrature weight of each dof
    SpMat K;

    // Strain operators: qᵀKq = sum_s coef_s * sum_k w_s[k] (B_s q)_k^2
    std::array<SpMat, 4> strain;
    std::array<Eigen::VectorXd, 4> strain_weight;
    std::array<double, 4> strain_coef{};

    // Boundary channel vectors: variant A actuators for the fluxes at L
    // (u and v nodes, and the ghost-node moment load on w_{N-1});
    // variant B unit vectors on the traces.
    std::array<Eigen::VectorXd, 3> g;
    // Variant A keeps the boundary moment m = w_xx(L) as a scalar state;
    // its energy share is moment_weight * m^2 = EI dx/4 m^2.
    double moment_weight = 0;
    std::array<double, 3> flux{};  // C_i (variant A) or D_i (variant B)

    // Augmented inner product for variant B: K + kappa * m mᵀ where m
    // picks the mass-weighted mean of w.  Zero vector in variant A.
    Eigen::VectorXd wmean;
    double kappa = 0;

    int size() const { return layout.size(); }
    Variant variant() const { return layout.variant; }

    // Interior damping diagonal sum_i a_i * weight on field i.
    Eigen::VectorXd damping_diagonal(const std::array<double, 3>& a) const;
    double kinetic_l2_sq(const Eigen::VectorXd& p) const;  // unweighted sum over fields of ||.||^2
    double field_cross(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const;  // rho-weighted <q,p>
};

SemiDiscreteSystem build_system(const Grid1D& grid, const PhysicalParams& params, Variant variant);

struct DiscreteState {
    Eigen::VectorXd q, p;
    double t = 0;
    double moment = 0;  // w_xx(L), variant A only

    static DiscreteState zero(const SemiDiscreteSystem& sys, double t = 0);
    bool finite() const;
};

// Cells: piecewise-constant step means (what the integrator feeds back);
// Interpolant: exact on the Hermite/linear interpolant; Trapezoid32: 32 panels in rho.
enum class DelayQuadrature { Cells, Interpolant, Trapezoid32 };

// tau_i(t) * int_0^1 z_i(rho,t)^2 d rho.
double delay_integral(const TraceHistory& history, int channel, double t, const DelaySpec& delays,
                      DelayQuadrature quad = DelayQuadrature::Cells);
// tau_i(t) * int_0^1 (1 - rho) z_i(rho,t)^2 d rho.
double delay_weighted_integral(const TraceHistory& history, int channel, double t, const DelaySpec& delays,
                               DelayQuadrature quad = DelayQuadrature::Cells);

double quadratic_energy(const DiscreteState& s, const SemiDiscreteSystem& sys);

double discrete_energy(const DiscreteState& s, const SemiDiscreteSystem& sys, const TraceHistory* history,
                       const DelaySpec& delays, const GainConfig& gains,
                       DelayQuadrature quad = DelayQuadrature::Cells);

double hspace_norm(const DiscreteState& s, const SemiDiscreteSystem& sys);

// Inner product with the augmented stiffness (variant B rigid mode lifted).
double augmented_inner(const DiscreteState& a, const DiscreteState& b, const SemiDiscreteSystem& sys);
double augmented_norm(const DiscreteState& s, const SemiDiscreteSystem& sys);

void write_matrix_market(const std::string& path, const SpMat& A);
void write_matrix_market(const std::string& path, const Eigen::VectorXd& diag);

}  // namespace sandwich
