#pragma once

#include <array>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "sandwich/grid.hpp"
#include "sandwich/integrator.hpp"

namespace sandwich {

class CgError : public std::runtime_error {
public:
    CgError(const std::string& what, int iteration) : std::runtime_error(what), iteration(iteration) {}
    int iteration;
};

// Terminal data of the adjoint lives in the state space; vectors are
// stacked as [q; p].
using StackedVec = Eigen::VectorXd;

StackedVec stack(const DiscreteState& s);
DiscreteState unstack(const StackedVec& x, const SemiDiscreteSystem& sys, double t = 0);

// Three displacement-trace series on the step grid t_n = n dt, n = 0..steps.
struct ObservationTriple {
    std::array<std::vector<double>, 3> y;
    std::size_t size() const { return y[0].size(); }
};

struct HumConfig {
    double T = 0;  // 0 selects 8 L / c_min
    double dt = 1e-2;
    double cg_tol = 1e-8;
    int max_iterations = 200;
    bool conjugate_residual = true;  // false: textbook CG
    bool precondition = true;        // M^-1 K~ on both blocks
    double tikhonov = 0;             // off-theory regularization eps ||Wt||^2

    double horizon(const SemiDiscreteSystem& sys) const;
    long steps(const SemiDiscreteSystem& sys) const;
};

struct AdjointSolve {
    ObservationTriple obs;
    DiscreteState initial;  // W(0)
    std::vector<double> energy;
};

// Control space pairing: sum_n dt sum_i D_i fbar_i ybar_i with step averages.
double control_inner(const ObservationTriple& f, const ObservationTriple& y, const SemiDiscreteSystem& sys,
                     double dt);

// Symplectic pairing sigma(X, W) = Xpᵀ M Wq - Xqᵀ M Wp.
double symplectic(const DiscreteState& X, const DiscreteState& W, const SemiDiscreteSystem& sys);

class HumProblem {
public:
    HumProblem(const SemiDiscreteSystem& sys, const HumConfig& cfg);

    // Backward in time from W(T) = Wt with f = 0 (reversed-time forward steps).
    AdjointSolve solve_adjoint(const DiscreteState& Wt) const;
    // Forward solve with controls sampled on the step grid.
    DiscreteState forward(const DiscreteState& U0, const ObservationTriple* controls) const;

    ObservationTriple controls_from_observation(const ObservationTriple& obs) const { return obs; }
    // Representer of X in the augmented inner product: <R X, W> = sigma(X, W).
    DiscreteState represent(const DiscreteState& X) const;

    DiscreteState apply_gramian(const DiscreteState& Wt) const;
    // (M^-1 K~ Xq, M^-1 K~ Xp): self-adjoint and positive in the augmented
    // product; offsets the omega^-4 decay of the displacement observation.
    DiscreteState precondition(const DiscreteState& X) const;
    DiscreteState rhs_from_initial_data(const DiscreteState& U0) const;

    double inner(const DiscreteState& a, const DiscreteState& b) const { return augmented_inner(a, b, *sys_); }
    double norm(const DiscreteState& a) const { return augmented_norm(a, *sys_); }

    const SemiDiscreteSystem& system() const { return *sys_; }
    const HumConfig& config() const { return cfg_; }
    double horizon() const { return T_; }
    long steps() const { return steps_; }
    int gramian_applications() const { return applications_; }

private:
    const SemiDiscreteSystem* sys_;
    HumConfig cfg_;
    double T_;
    long steps_;
    ControlledStepper stepper_;
    SpMat Kt_;
    Eigen::SimplicialLDLT<SpMat> Ktilde_;
    mutable int applications_ = 0;
};

struct CgResult {
    Eigen::VectorXd x;
    std::vector<double> residuals;  // relative sqrt(<r, P r>), entry 0 = 1
    int iterations = 0;
    bool converged = false;
    double min_rayleigh = 0, max_rayleigh = 0;  // over applied search directions
};

using LinearOp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using InnerProduct = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

// Conjugate residual (monotone residual) or conjugate gradient for an
// operator self-adjoint in the given inner product, with an optional
// preconditioner that must be self-adjoint and positive in it.  Throws
// CgError on NaN or when the best residual has not improved for 25
// (CR) or 100 (CG) consecutive iterations.
CgResult cg_solve(const LinearOp& apply, const Eigen::VectorXd& b, double tol, int maxit,
                  const InnerProduct& inner, bool conjugate_residual = true, const LinearOp& precond = nullptr);

struct HumSolution {
    ObservationTriple controls;
    std::vector<double> t;
    DiscreteState adjoint_terminal;
    std::vector<double> residuals;
    int iterations = 0;
    bool converged = false;
    double terminal_relative_norm = 0;
    double control_cost = 0;  // <Lambda e, e>
    double min_rayleigh = 0, max_rayleigh = 0;
    double horizon = 0;

    std::string to_json() const;
    std::string controls_csv() const;
};

HumSolution compute_null_control(const DiscreteState& U0, const HumProblem& prob);

struct ObservabilityEstimate {
    double min_quotient = 0, max_quotient = 0;
    int samples = 0;
};

// Rayleigh quotients <Lambda W, W>/||W||^2 over random unit terminal data.
ObservabilityEstimate estimate_observability(const HumProblem& prob, int n_samples, std::uint64_t seed,
                                             int cutoff = 6);

}  // namespace sandwich
