#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "sandwich/delay_line.hpp"
#include "sandwich/grid.hpp"
#include "sandwich/model.hpp"

namespace sandwich {

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, long step = -1) : std::runtime_error(what), step(step) {}
    long step;
};

struct SchemeConfig {
    double dt = 1e-2;
    double T = 1.0;
    int stride = 1;
    bool delay_safety = true;
    double solver_tol = 1e-12;
    Interpolation interpolation = Interpolation::Hermite;
    DelayQuadrature quadrature = DelayQuadrature::Cells;
    // On a SolverError return what was computed, with SimOutput::failure set.
    bool keep_partial = false;

    long steps() const;
    void validate() const;
};

struct ModelSpecs {
    GainConfig gains;
    DelaySpec delays;
    DampingSpec damping;
};

using ControlVec = std::array<double, 3>;
using ControlFn = std::function<ControlVec(double)>;

// Average-acceleration Newmark (trapezoidal rule on the first-order form):
//   M (p1 - p0) = dt/2 (F0 + F1 - C (p0 + p1) - K (q0 + q1)),  q1 = q0 + dt/2 (p0 + p1).
// C = diag(c) + sum_r s_r g_r g_rᵀ.  The factorization of
// M + dt/2 C + dt^2/4 K is cached while the coefficients stay put.
class Newmark {
public:
    Newmark(const SemiDiscreteSystem& sys, double dt, double solver_tol = 1e-12);

    void set_damping(const Eigen::VectorXd& diag, const std::array<double, 3>& rank_one = {0, 0, 0});
    // Advance (q, p) one step with the averaged load Fbar = (F0 + F1)/2.
    void step(Eigen::VectorXd& q, Eigen::VectorXd& p, const Eigen::VectorXd& Fbar) const;
    Eigen::VectorXd damping_times(const Eigen::VectorXd& v) const;
    Eigen::VectorXd acceleration(const Eigen::VectorXd& q, const Eigen::VectorXd& p, const Eigen::VectorXd& F) const;

    double dt() const { return dt_; }
    int factorizations() const { return factorizations_; }
    const SemiDiscreteSystem& system() const { return *sys_; }

private:
    void refactor();

    const SemiDiscreteSystem* sys_;
    double dt_, tol_;
    Eigen::VectorXd cdiag_;
    std::array<double, 3> rank_one_{0, 0, 0};
    bool have_factor_ = false;
    bool use_iterative_ = false;
    SpMat A_;
    Eigen::SimplicialLDLT<SpMat> ldlt_;
    int factorizations_ = 0;
};

struct InitialData {
    DiscreteState state;
    // Initial histories of the delayed traces on [-tau_i(0), 0]; defaults to zero.
    std::array<ScalarFn, 3> history;
    std::array<ScalarFn, 3> history_slope;
};

InitialData make_initial(DiscreteState s);

// Per-step record of the energy balance of the delayed variant.
struct StepLedger {
    double damping_power = 0;               // -sum a_i(t_mid) ||field_t||^2 at the averaged velocity
    std::array<double, 3> boundary_form{};  // 1/2 (y, z) Phi (y, z)ᵀ with tau' at the midpoint
    std::array<double, 3> y_mid{}, z_mid{}, taudot_mid{};
    // Form with the secant rate 1 - (theta(t1)-theta(t0))/dt minus the
    // Jensen gap of the cell outflow: closes the step balance to round-off.
    std::array<double, 3> exact_form{};
};

struct SimOutput {
    Variant variant = Variant::StabilizedDelayed;
    double dt = 0;
    int stride = 1;
    std::vector<double> t;                        // every step
    std::vector<double> energy;                   // discrete energy incl. delay terms
    std::vector<double> quad_energy;              // 1/2(pᵀMp + qᵀKq)
    std::vector<double> cross;                    // rho-weighted <q, p>
    std::vector<double> kinetic_l2;               // ||u_t||^2 + ||v_t||^2 + ||w_t||^2
    std::array<std::vector<double>, 3> trace_vel; // u_t(L), v_t(L), w_tx(L) (or trace velocities)
    std::array<std::vector<double>, 3> trace_disp;
    std::array<std::vector<double>, 3> delayed;   // z_i(1, t)
    std::array<std::vector<double>, 3> delay_int; // tau_i int z_i^2
    std::array<std::vector<double>, 3> delay_wint;// tau_i int (1-rho) z_i^2
    std::array<std::vector<double>, 3> control;   // variant B controls f_i(t_n)
    std::vector<StepLedger> ledger;               // one per step n -> n+1
    std::vector<double> sample_t;                 // decimated
    std::vector<long> sample_step;
    std::vector<DiscreteState> states;
    int factorizations = 0;
    std::string failure;  // empty unless the run stopped early

    bool partial() const { return !failure.empty(); }
    std::size_t steps() const { return ledger.size(); }
    const DiscreteState& final_state() const { return states.back(); }
};

// Stepping objects exposing single steps of both variants.
// The delayed stepper carries the boundary moment m = w_xx(L) as a scalar
// state (ghost-node closure):  (alpha3 dx / 2) m' = -m - alpha3 gᵀp - beta3 z3,
// with the rotation rate w_tx(L) = (-m - beta3 z3) / alpha3.
class DelayedStepper {
public:
    DelayedStepper(const SemiDiscreteSystem& sys, const SchemeConfig& cfg, const ModelSpecs& specs);
    void start(const InitialData& init);
    StepLedger step();

    const DiscreteState& state() const { return s_; }
    const TraceHistory& history() const { return hist_; }
    long step_index() const { return n_; }
    Eigen::VectorXd load(double t) const;
    double delayed(int i, double t) const { return eval_delayed(hist_, i, t, specs_.delays); }
    double energy() const;
    int factorizations() const { return nm_.factorizations(); }
    // Channel velocity at the current time; the rotation channel reads it
    // off the moment state through the feedback law.
    double trace_rate(int i) const;

private:
    Eigen::VectorXd damping_diag(double t) const;
    std::array<double, 3> rank_one() const;
    Eigen::VectorXd acceleration(const Eigen::VectorXd& F, double t) const;
    double trace_rate_slope(const Eigen::VectorXd& acc) const;

    const SemiDiscreteSystem* sys_;
    SchemeConfig cfg_;
    ModelSpecs specs_;
    Newmark nm_;
    DiscreteState s_;
    TraceHistory hist_;
    long n_ = 0;
};

class ControlledStepper {
public:
    ControlledStepper(const SemiDiscreteSystem& sys, double dt, double solver_tol = 1e-12);
    // Advance with controls sampled at the two step ends.
    void step(DiscreteState& s, const ControlVec& f0, const ControlVec& f1) const;
    Eigen::VectorXd load(const ControlVec& f) const;
    const Newmark& newmark() const { return nm_; }

private:
    const SemiDiscreteSystem* sys_;
    Newmark nm_;
};

DiscreteState step_damped_delayed(DelayedStepper& stepper);
DiscreteState step_conservative_controlled(const DiscreteState& s, const ControlledStepper& stepper,
                                           const ControlVec& f0, const ControlVec& f1);

SimOutput simulate(const InitialData& init, const SemiDiscreteSystem& sys, const SchemeConfig& cfg,
                   const ModelSpecs& specs, const ControlFn& controls = nullptr);

// Trajectory table: one row per decimated sample.
std::string trajectory_csv(const SimOutput& out);

}  // namespace sandwich
