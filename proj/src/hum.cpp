#include "sandwich/hum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "sandwich/initial_data.hpp"
#include "sandwich/io.hpp"

namespace sandwich {

StackedVec stack(const DiscreteState& s) {
    StackedVec x(s.q.size() + s.p.size());
    x << s.q, s.p;
    return x;
}

DiscreteState unstack(const StackedVec& x, const SemiDiscreteSystem& sys, double t) {
    const int n = sys.size();
    if (x.size() != 2 * n) throw std::invalid_argument("stacked vector does not match the dof layout");
    return {x.head(n), x.tail(n), t, 0.0};
}

double HumConfig::horizon(const SemiDiscreteSystem& sys) const {
    return T > 0 ? T : 8.0 * sys.grid.L / sys.params.c_min();
}

long HumConfig::steps(const SemiDiscreteSystem& sys) const {
    return static_cast<long>(std::ceil(horizon(sys) / dt - 1e-9));
}

double control_inner(const ObservationTriple& f, const ObservationTriple& y, const SemiDiscreteSystem& sys,
                     double dt) {
    if (f.size() != y.size()) throw std::invalid_argument("control and observation grids differ");
    double s = 0;
    for (int i = 0; i < 3; ++i) {
        double si = 0;
        for (std::size_t n = 0; n + 1 < f.size(); ++n)
            si += 0.25 * (f.y[i][n] + f.y[i][n + 1]) * (y.y[i][n] + y.y[i][n + 1]);
        s += sys.flux[i] * dt * si;
    }
    return s;
}

double symplectic(const DiscreteState& X, const DiscreteState& W, const SemiDiscreteSystem& sys) {
    return (sys.M.array() * (X.p.array() * W.q.array() - X.q.array() * W.p.array())).sum();
}

HumProblem::HumProblem(const SemiDiscreteSystem& sys, const HumConfig& cfg)
    : sys_(&sys), cfg_(cfg), T_(cfg.horizon(sys)), steps_(cfg.steps(sys)), stepper_(sys, cfg.dt) {
    if (sys.variant() != Variant::ControlledConservative)
        throw std::invalid_argument("null control needs the conservative variant");
    if (!(cfg.dt > 0)) throw ConfigError("HUM dt must be positive");
    if (cfg.max_iterations < 1) throw ConfigError("HUM max_iterations must be >= 1");
    const int n = sys.size();
    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < sys.K.outerSize(); ++k)
        for (SpMat::InnerIterator it(sys.K, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
    for (int i = 0; i < n; ++i) {
        if (sys.wmean[i] == 0.0) continue;
        for (int j = 0; j < n; ++j)
            if (sys.wmean[j] != 0.0) trip.emplace_back(i, j, sys.kappa * sys.wmean[i] * sys.wmean[j]);
    }
    Kt_.resize(n, n);
    Kt_.setFromTriplets(trip.begin(), trip.end());
    Ktilde_.compute(Kt_);
    if (Ktilde_.info() != Eigen::Success) throw SolverError("augmented stiffness factorization failed");
}

AdjointSolve HumProblem::solve_adjoint(const DiscreteState& Wt) const {
    const auto& sys = *sys_;
    AdjointSolve r;
    for (auto& y : r.obs.y) y.assign(steps_ + 1, 0.0);
    // s = T - t: step forward with the velocity reversed
    DiscreteState s{Wt.q, -Wt.p, 0.0, 0.0};
    const ControlVec zero{0, 0, 0};
    r.energy.resize(steps_ + 1);
    for (long n = steps_;; --n) {
        for (int i = 0; i < 3; ++i) r.obs.y[i][n] = s.q[sys.layout.trace(i)];
        r.energy[n] = quadratic_energy(s, sys);
        if (n == 0) break;
        stepper_.step(s, zero, zero);
    }
    if (!s.finite()) throw SolverError("non-finite adjoint state");
    r.initial = {s.q, -s.p, 0.0, 0.0};
    return r;
}

DiscreteState HumProblem::forward(const DiscreteState& U0, const ObservationTriple* controls) const {
    if (controls && controls->size() != static_cast<std::size_t>(steps_ + 1))
        throw std::invalid_argument("control series does not match the step grid");
    DiscreteState s{U0.q, U0.p, 0.0, 0.0};
    auto f_at = [&](long n) {
        ControlVec f{0, 0, 0};
        if (controls)
            for (int i = 0; i < 3; ++i) f[i] = controls->y[i][n];
        return f;
    };
    for (long n = 0; n < steps_; ++n) stepper_.step(s, f_at(n), f_at(n + 1));
    if (!s.finite()) throw SolverError("non-finite forward state");
    s.t = T_;
    return s;
}

DiscreteState HumProblem::represent(const DiscreteState& X) const {
    DiscreteState r;
    r.q = Ktilde_.solve(sys_->M.cwiseProduct(X.p));
    r.p = -X.q;
    r.t = X.t;
    return r;
}

DiscreteState HumProblem::precondition(const DiscreteState& X) const {
    DiscreteState r = X;
    r.q = (Kt_ * X.q).cwiseQuotient(sys_->M);
    r.p = (Kt_ * X.p).cwiseQuotient(sys_->M);
    return r;
}

DiscreteState HumProblem::apply_gramian(const DiscreteState& Wt) const {
    ++applications_;
    const auto adj = solve_adjoint(Wt);
    const auto f = controls_from_observation(adj.obs);
    const DiscreteState U = forward(DiscreteState::zero(*sys_), &f);
    DiscreteState r = represent(U);
    if (cfg_.tikhonov > 0) {
        r.q += cfg_.tikhonov * Wt.q;
        r.p += cfg_.tikhonov * Wt.p;
    }
    return r;
}

DiscreteState HumProblem::rhs_from_initial_data(const DiscreteState& U0) const {
    DiscreteState r = represent(forward(U0, nullptr));
    r.q = -r.q;
    r.p = -r.p;
    return r;
}

CgResult cg_solve(const LinearOp& apply, const Eigen::VectorXd& b, double tol, int maxit, const InnerProduct& inner,
                  bool conjugate_residual, const LinearOp& precond) {
    CgResult res;
    res.x = Eigen::VectorXd::Zero(b.size());
    auto P = [&](const Eigen::VectorXd& v) { return precond ? precond(v) : v; };
    // residual measure: <r, P r>, the norm conjugate residual keeps monotone
    auto rnorm = [&](const Eigen::VectorXd& r, const Eigen::VectorXd& z) { return std::sqrt(std::max(0.0, inner(r, z))); };
    Eigen::VectorXd r = b, z = P(b);
    const double bnorm = rnorm(r, z);
    res.residuals.push_back(1.0);
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }
    res.min_rayleigh = std::numeric_limits<double>::infinity();
    auto note_rayleigh = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& Av) {
        const double vv = inner(v, v);
        if (vv <= 0) return;
        const double q = inner(Av, v) / vv;
        res.min_rayleigh = std::min(res.min_rayleigh, q);
        res.max_rayleigh = std::max(res.max_rayleigh, q);
    };

    Eigen::VectorXd p = z;
    Eigen::VectorXd Az = apply(z);
    note_rayleigh(z, Az);
    Eigen::VectorXd Ap = Az;
    double rho = conjugate_residual ? inner(z, Az) : inner(r, z);
    double best = 1.0;
    int since_best = 0;
    // the CG residual oscillates in this norm; judge it over a longer window
    const int window = conjugate_residual ? 25 : 100;
    for (int k = 1; k <= maxit; ++k) {
        Eigen::VectorXd PAp;
        double denom;
        if (conjugate_residual) {
            PAp = P(Ap);
            denom = inner(Ap, PAp);
        } else {
            denom = inner(p, Ap);
        }
        if (!(denom > 0) || !std::isfinite(denom)) throw CgError("breakdown: non-positive curvature", k);
        const double a = rho / denom;
        res.x += a * p;
        r -= a * Ap;
        if (conjugate_residual)
            z -= a * PAp;
        else
            z = P(r);
        const double rel = rnorm(r, z) / bnorm;
        if (!std::isfinite(rel) || !res.x.allFinite()) throw CgError("NaN in iterates", k);
        res.residuals.push_back(rel);
        res.iterations = k;
        if (rel <= tol) {
            res.converged = true;
            break;
        }
        if (rel < best) {
            best = rel;
            since_best = 0;
        } else if (++since_best >= window) {
            throw CgError("stagnation: no residual decrease over " + std::to_string(window) + " iterations", k);
        }
        if (k == maxit) break;
        double rho1;
        if (conjugate_residual) {
            Az = apply(z);
            note_rayleigh(z, Az);
            rho1 = inner(z, Az);
        } else {
            rho1 = inner(r, z);
        }
        const double beta = rho1 / rho;
        rho = rho1;
        p = z + beta * p;
        if (conjugate_residual) {
            Ap = Az + beta * Ap;
        } else {
            Ap = apply(p);
            note_rayleigh(p, Ap);
        }
    }
    return res;
}

HumSolution compute_null_control(const DiscreteState& U0, const HumProblem& prob) {
    const auto& sys = prob.system();
    const auto& cfg = prob.config();
    HumSolution sol;
    sol.horizon = prob.horizon();
    const StackedVec b = stack(prob.rhs_from_initial_data(U0));
    auto apply = [&](const Eigen::VectorXd& x) { return stack(prob.apply_gramian(unstack(x, sys))); };
    auto inner = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& c) {
        return prob.inner(unstack(a, sys), unstack(c, sys));
    };
    LinearOp precond;
    if (cfg.precondition)
        precond = [&](const Eigen::VectorXd& x) { return stack(prob.precondition(unstack(x, sys))); };
    const CgResult cg = cg_solve(apply, b, cfg.cg_tol, cfg.max_iterations, inner, cfg.conjugate_residual, precond);
    sol.residuals = cg.residuals;
    sol.iterations = cg.iterations;
    sol.converged = cg.converged;
    sol.min_rayleigh = cg.min_rayleigh;
    sol.max_rayleigh = cg.max_rayleigh;
    sol.adjoint_terminal = unstack(cg.x, sys, prob.horizon());

    const auto adj = prob.solve_adjoint(sol.adjoint_terminal);
    sol.controls = prob.controls_from_observation(adj.obs);
    sol.control_cost = control_inner(sol.controls, adj.obs, sys, cfg.dt);
    const DiscreteState UT = prob.forward(U0, &sol.controls);
    const double n0 = prob.norm(U0);
    sol.terminal_relative_norm = n0 > 0 ? prob.norm(UT) / n0 : prob.norm(UT);
    sol.t.resize(sol.controls.size());
    for (std::size_t n = 0; n < sol.t.size(); ++n) sol.t[n] = n * cfg.dt;
    return sol;
}

std::string HumSolution::to_json() const {
    nlohmann::ordered_json j;
    j["horizon"] = horizon;
    j["iterations"] = iterations;
    j["converged"] = converged;
    j["terminal_relative_norm"] = terminal_relative_norm;
    j["control_cost"] = control_cost;
    j["rayleigh"] = {{"min", min_rayleigh}, {"max", max_rayleigh}};
    j["residuals"] = residuals;
    return j.dump(2);
}

std::string HumSolution::controls_csv() const {
    CsvTable tab({"t", "f1", "f2", "f3"});
    for (std::size_t n = 0; n < t.size(); ++n) tab.add({t[n], controls.y[0][n], controls.y[1][n], controls.y[2][n]});
    return tab.str();
}

ObservabilityEstimate estimate_observability(const HumProblem& prob, int n_samples, std::uint64_t seed,
                                             int cutoff) {
    if (n_samples < 10) throw ConfigError("observability needs at least 10 samples");
    const auto& sys = prob.system();
    std::mt19937_64 rng(seed);
    ObservabilityEstimate est;
    est.min_quotient = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n_samples; ++k) {
        DiscreteState W = random_smooth_state(sys, rng, cutoff);
        const double nrm = prob.norm(W);
        if (nrm == 0.0) continue;
        W.q /= nrm;
        W.p /= nrm;
        const auto adj = prob.solve_adjoint(W);
        const double q = control_inner(adj.obs, adj.obs, sys, prob.config().dt);
        est.min_quotient = std::min(est.min_quotient, q);
        est.max_quotient = std::max(est.max_quotient, q);
        ++est.samples;
    }
    return est;
}

}  // namespace sandwich
