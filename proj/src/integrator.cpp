#include "sandwich/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>

#include "sandwich/io.hpp"

namespace sandwich {

long SchemeConfig::steps() const {
    if (T <= 0) return 0;
    return static_cast<long>(std::ceil(T / dt - 1e-9));
}

void SchemeConfig::validate() const {
    if (!(dt > 0) || !std::isfinite(dt)) throw ConfigError("scheme dt must be positive");
    if (!(T >= 0) || !std::isfinite(T)) throw ConfigError("scheme T must be nonnegative");
    if (stride < 1) throw ConfigError("stride must be >= 1");
}

// ---------------------------------------------------------------- Newmark

Newmark::Newmark(const SemiDiscreteSystem& sys, double dt, double solver_tol)
    : sys_(&sys), dt_(dt), tol_(solver_tol), cdiag_(Eigen::VectorXd::Zero(sys.size())) {
    if (!(dt > 0)) throw std::invalid_argument("time step must be positive");
}

void Newmark::set_damping(const Eigen::VectorXd& diag, const std::array<double, 3>& rank_one) {
    bool changed = !have_factor_ || rank_one != rank_one_;
    if (!changed) {
        const double scale = std::max(diag.cwiseAbs().maxCoeff(), cdiag_.cwiseAbs().maxCoeff());
        changed = (diag - cdiag_).cwiseAbs().maxCoeff() > 1e-14 * scale;
    }
    cdiag_ = diag;
    rank_one_ = rank_one;
    if (changed) refactor();
}

void Newmark::refactor() {
    const auto& sys = *sys_;
    const int n = sys.size();
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i) trip.emplace_back(i, i, sys.M[i] + 0.5 * dt_ * cdiag_[i]);
    for (int r = 0; r < 3; ++r) {
        if (rank_one_[r] == 0.0) continue;
        const auto& g = sys.g[r];
        for (int i = 0; i < n; ++i) {
            if (g[i] == 0.0) continue;
            for (int j = 0; j < n; ++j)
                if (g[j] != 0.0) trip.emplace_back(i, j, 0.5 * dt_ * rank_one_[r] * g[i] * g[j]);
        }
    }
    SpMat A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A_ = A + (0.25 * dt_ * dt_) * sys.K;
    ldlt_.compute(A_);
    use_iterative_ = ldlt_.info() != Eigen::Success;
    have_factor_ = true;
    ++factorizations_;
}

Eigen::VectorXd Newmark::damping_times(const Eigen::VectorXd& v) const {
    Eigen::VectorXd r = cdiag_.cwiseProduct(v);
    for (int k = 0; k < 3; ++k)
        if (rank_one_[k] != 0.0) r += (rank_one_[k] * sys_->g[k].dot(v)) * sys_->g[k];
    return r;
}

void Newmark::step(Eigen::VectorXd& q, Eigen::VectorXd& p, const Eigen::VectorXd& Fbar) const {
    if (!have_factor_) throw std::logic_error("Newmark::set_damping must precede step");
    const auto& sys = *sys_;
    const Eigen::VectorXd Kq = sys.K * q, Kp = sys.K * p;
    const Eigen::VectorXd rhs = sys.M.cwiseProduct(p) - 0.5 * dt_ * damping_times(p) - dt_ * Kq -
                                (0.25 * dt_ * dt_) * Kp + dt_ * Fbar;
    Eigen::VectorXd p1;
    if (!use_iterative_) {
        p1 = ldlt_.solve(rhs);
    } else {
        Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
        cg.setTolerance(tol_);
        cg.compute(A_);
        p1 = cg.solveWithGuess(rhs, p);
        if (cg.info() != Eigen::Success) throw SolverError("iterative fallback failed to converge");
    }
    q += 0.5 * dt_ * (p + p1);
    p = std::move(p1);
}

Eigen::VectorXd Newmark::acceleration(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                      const Eigen::VectorXd& F) const {
    return (F - damping_times(p) - sys_->K * q).cwiseQuotient(sys_->M);
}

// ---------------------------------------------------------- initial data

InitialData make_initial(DiscreteState s) {
    InitialData d;
    d.state = std::move(s);
    return d;
}

// ------------------------------------------------------- delayed stepper

DelayedStepper::DelayedStepper(const SemiDiscreteSystem& sys, const SchemeConfig& cfg, const ModelSpecs& specs)
    : sys_(&sys), cfg_(cfg), specs_(specs), nm_(sys, cfg.dt, cfg.solver_tol) {
    if (sys.variant() != Variant::StabilizedDelayed)
        throw std::invalid_argument("delayed stepper needs the stabilized variant");
    cfg.validate();
    if (cfg.delay_safety) {
        for (int i = 0; i < 3; ++i) {
            const double lo = std::min(tau_min(specs.delays[i].tau), specs.delays[i].tau0);
            if (cfg.dt > lo) {
                std::ostringstream os;
                os << "dt = " << cfg.dt << " exceeds the minimal delay " << lo << " of channel " << i + 1;
                throw ConfigError(os.str());
            }
        }
    }
    hist_.mode = cfg.interpolation;
}

Eigen::VectorXd DelayedStepper::damping_diag(double t) const {
    return sys_->damping_diagonal({specs_.damping[0](t), specs_.damping[1](t), specs_.damping[2](t)});
}

std::array<double, 3> DelayedStepper::rank_one() const {
    std::array<double, 3> r{};
    for (int i = 0; i < 2; ++i) r[i] = sys_->flux[i] * specs_.gains.alpha[i];
    // the moment state eliminated from the trapezoid step leaves a scaled
    // rank-one term on the rotation channel
    const double a = specs_.gains.alpha[2], dt = cfg_.dt;
    r[2] = sys_->flux[2] * a * dt / (a * sys_->grid.dx + dt);
    return r;
}

Eigen::VectorXd DelayedStepper::load(double t) const {
    Eigen::VectorXd F = Eigen::VectorXd::Zero(sys_->size());
    for (int i = 0; i < 2; ++i) {
        const double b = specs_.gains.beta[i];
        if (b != 0.0) F -= (sys_->flux[i] * b * delayed(i, t)) * sys_->g[i];
    }
    return F;
}

double DelayedStepper::trace_rate(int i) const {
    if (i < 2 || specs_.gains.alpha[2] == 0.0) return sys_->g[i].dot(s_.p);
    return (-s_.moment - specs_.gains.beta[2] * delayed(2, s_.t)) / specs_.gains.alpha[2];
}

double DelayedStepper::trace_rate_slope(const Eigen::VectorXd& acc) const {
    const double a = specs_.gains.alpha[2], b = specs_.gains.beta[2];
    if (a == 0.0) return sys_->g[2].dot(acc);
    const double t = s_.t;
    const double z = delayed(2, t);
    const double th = delayed_argument(2, t, specs_.delays);
    const double zdot = hist_.lookup_slope(2, th) * (1.0 - specs_.delays[2].rate(t));
    const double mdot = 2.0 * (-s_.moment - a * sys_->g[2].dot(s_.p) - b * z) / (a * sys_->grid.dx);
    return (-mdot - b * zdot) / a;
}

Eigen::VectorXd DelayedStepper::acceleration(const Eigen::VectorXd& F, double t) const {
    const auto& sys = *sys_;
    Eigen::VectorXd Cp = damping_diag(t).cwiseProduct(s_.p);
    for (int k = 0; k < 2; ++k) {
        const double r = sys.flux[k] * specs_.gains.alpha[k];
        if (r != 0.0) Cp += (r * sys.g[k].dot(s_.p)) * sys.g[k];
    }
    return (F + (sys.flux[2] * s_.moment) * sys.g[2] - Cp - sys.K * s_.q).cwiseQuotient(sys.M);
}

void DelayedStepper::start(const InitialData& init) {
    s_ = init.state;
    if (s_.q.size() != sys_->size() || s_.p.size() != sys_->size())
        throw std::invalid_argument("initial state does not match the dof layout");
    n_ = 0;
    if (s_.t != 0.0) throw std::invalid_argument("delayed runs start at t = 0");
    const double t0 = 0.0;
    for (int i = 0; i < 3; ++i) {
        const auto& dc = specs_.delays[i];
        ScalarFn f = init.history[i] ? init.history[i] : ScalarFn([](double) { return 0.0; });
        ScalarFn df = init.history_slope[i];
        if (!init.history[i] && !df) df = [](double) { return 0.0; };
        hist_.init_channel(i, f, dc(t0), df);
        hist_.set_retention(i, std::max(dc.M, tau_max(dc.tau)));
    }
    // moment consistent with the feedback law, dropping the O(dx) relaxation
    s_.moment = -specs_.gains.alpha[2] * sys_->g[2].dot(s_.p) - specs_.gains.beta[2] * delayed(2, t0);
    nm_.set_damping(damping_diag(t0), rank_one());
    const Eigen::VectorXd a = acceleration(load(t0), t0);
    for (int i = 0; i < 2; ++i) hist_.push(i, t0, sys_->g[i].dot(s_.p), sys_->g[i].dot(a));
    hist_.push(2, t0, trace_rate(2), trace_rate_slope(a));
}

StepLedger DelayedStepper::step() {
    const auto& sys = *sys_;
    const double dt = cfg_.dt;
    const double t0 = s_.t;
    const double t1 = (n_ + 1) * dt;
    const double tm = t0 + 0.5 * dt;

    // delayed feedback: exact mean of the stored cell means over [theta(t0), theta(t1)]
    std::array<double, 3> th0{}, th1{}, zbar{};
    try {
        for (int i = 0; i < 3; ++i) {
            th0[i] = delayed_argument(i, t0, specs_.delays);
            th1[i] = delayed_argument(i, t1, specs_.delays);
            if (!(th1[i] > th0[i])) throw SolverError("delayed argument not increasing", n_);
            zbar[i] = hist_.cell_average(i, th0[i], th1[i]);
        }
    } catch (const std::out_of_range& e) {
        throw SolverError(std::string("delayed lookup needs unknown data: ") + e.what(), n_);
    }
    const Eigen::VectorXd dmid = damping_diag(tm);
    const auto r = rank_one();
    nm_.set_damping(dmid, r);

    Eigen::VectorXd Fbar = Eigen::VectorXd::Zero(sys.size());
    for (int i = 0; i < 2; ++i) {
        const double b = specs_.gains.beta[i];
        if (b != 0.0) Fbar -= (sys.flux[i] * b * zbar[i]) * sys.g[i];
    }

    // moment channel: (a dx/2) m' = -m - a g.p - b z, trapezoid in time
    const double C3 = sys.flux[2], a3 = specs_.gains.alpha[2], b3 = specs_.gains.beta[2];
    const double c = 0.5 * (a3 * sys.grid.dx + dt);
    const double m0 = s_.moment;
    const double y0 = sys.g[2].dot(s_.p);
    const double rhs2 = 0.5 * (a3 * sys.grid.dx - dt) * m0 - 0.5 * dt * a3 * y0 - dt * b3 * zbar[2];
    Fbar += (0.5 * C3 * (m0 + rhs2 / c) + 0.5 * r[2] * y0) * sys.g[2];

    const Eigen::VectorXd p0 = s_.p;
    nm_.step(s_.q, s_.p, Fbar);
    s_.moment = (rhs2 - 0.5 * dt * a3 * sys.g[2].dot(s_.p)) / c;
    s_.t = t1;
    ++n_;
    if (!s_.finite()) throw SolverError("non-finite state", n_);

    StepLedger led;
    const Eigen::VectorXd pbar = 0.5 * (p0 + s_.p);
    led.damping_power = -(dmid.array() * pbar.array().square()).sum();
    std::array<double, 3> ybar{};
    for (int i = 0; i < 3; ++i) {
        const double C = sys.flux[i], a = specs_.gains.alpha[i], b = specs_.gains.beta[i];
        double y = sys.g[i].dot(pbar);
        if (i == 2 && a != 0.0) y = (-0.5 * (m0 + s_.moment) - b * zbar[2]) / a;
        ybar[i] = y;
        const double z = zbar[i];
        auto form = [&](double rate) {
            return 0.5 * ((-2 * C * a + std::abs(b)) * y * y - 2 * C * b * y * z + std::abs(b) * (rate - 1) * z * z);
        };
        const double rate = specs_.delays[i].rate(tm);
        led.y_mid[i] = y;
        led.z_mid[i] = z;
        led.taudot_mid[i] = rate;
        led.boundary_form[i] = form(rate);
        // Jensen gap of the outflow over the cells leaving the window
        const double w = th1[i] - th0[i];
        const double gap = 0.5 * std::abs(b) * (hist_.cell_integral_sq(i, th0[i], th1[i]) - w * z * z) / dt;
        led.exact_form[i] = form(1.0 - w / dt) - gap;
    }

    const Eigen::VectorXd acc = acceleration(load(t1), t1);
    for (int i = 0; i < 2; ++i) hist_.push(i, t1, sys.g[i].dot(s_.p), sys.g[i].dot(acc), ybar[i]);
    hist_.push(2, t1, trace_rate(2), trace_rate_slope(acc), ybar[2]);
    return led;
}

double DelayedStepper::energy() const {
    return discrete_energy(s_, *sys_, &hist_, specs_.delays, specs_.gains, cfg_.quadrature);
}

// ---------------------------------------------------- controlled stepper

ControlledStepper::ControlledStepper(const SemiDiscreteSystem& sys, double dt, double solver_tol)
    : sys_(&sys), nm_(sys, dt, solver_tol) {
    if (sys.variant() != Variant::ControlledConservative)
        throw std::invalid_argument("controlled stepper needs the conservative variant");
    nm_.set_damping(Eigen::VectorXd::Zero(sys.size()));
}

Eigen::VectorXd ControlledStepper::load(const ControlVec& f) const {
    Eigen::VectorXd F = Eigen::VectorXd::Zero(sys_->size());
    for (int i = 0; i < 3; ++i) F[sys_->layout.trace(i)] = sys_->flux[i] * f[i];
    return F;
}

void ControlledStepper::step(DiscreteState& s, const ControlVec& f0, const ControlVec& f1) const {
    ControlVec fb;
    for (int i = 0; i < 3; ++i) fb[i] = 0.5 * (f0[i] + f1[i]);
    nm_.step(s.q, s.p, load(fb));
    s.t += nm_.dt();
}

DiscreteState step_damped_delayed(DelayedStepper& stepper) {
    stepper.step();
    return stepper.state();
}

DiscreteState step_conservative_controlled(const DiscreteState& s, const ControlledStepper& stepper,
                                           const ControlVec& f0, const ControlVec& f1) {
    DiscreteState r = s;
    stepper.step(r, f0, f1);
    if (!r.finite()) throw SolverError("non-finite state");
    return r;
}

// -------------------------------------------------------------- simulate

namespace {

void record_common(SimOutput& out, const SemiDiscreteSystem& sys, const DiscreteState& s) {
    out.t.push_back(s.t);
    out.quad_energy.push_back(quadratic_energy(s, sys));
    out.cross.push_back(sys.field_cross(s.q, s.p));
    out.kinetic_l2.push_back(sys.kinetic_l2_sq(s.p));
    for (int i = 0; i < 3; ++i) {
        out.trace_vel[i].push_back(sys.g[i].dot(s.p));
        out.trace_disp[i].push_back(sys.g[i].dot(s.q));
    }
}

void maybe_sample(SimOutput& out, const DiscreteState& s, long n, long Nt) {
    if (n % out.stride == 0 || n == Nt) {
        out.sample_t.push_back(s.t);
        out.sample_step.push_back(n);
        out.states.push_back(s);
    }
}

}  // namespace

namespace {

// The last recorded step becomes a sample so a truncated table still ends
// where the run stopped.
void mark_partial(SimOutput& out, const SolverError& e, const DiscreteState& last_good) {
    out.failure = e.what();
    const long last = static_cast<long>(out.t.size()) - 1;
    if (out.sample_step.empty() || out.sample_step.back() != last) {
        out.sample_step.push_back(last);
        out.sample_t.push_back(out.t[last]);
        out.states.push_back(last_good);
    }
}

}  // namespace

SimOutput simulate(const InitialData& init, const SemiDiscreteSystem& sys, const SchemeConfig& cfg,
                   const ModelSpecs& specs, const ControlFn& controls) {
    cfg.validate();
    SimOutput out;
    out.variant = sys.variant();
    out.dt = cfg.dt;
    out.stride = cfg.stride;
    const long Nt = cfg.steps();

    if (sys.variant() == Variant::StabilizedDelayed) {
        if (controls) throw std::invalid_argument("controls apply to the conservative variant only");
        DelayedStepper st(sys, cfg, specs);
        st.start(init);
        auto record = [&](long n) {
            const auto& s = st.state();
            record_common(out, sys, s);
            out.trace_vel[2].back() = st.trace_rate(2);
            double E = out.quad_energy.back();
            for (int i = 0; i < 3; ++i) {
                out.delayed[i].push_back(st.delayed(i, s.t));
                const double di = delay_integral(st.history(), i, s.t, specs.delays, cfg.quadrature);
                out.delay_int[i].push_back(di);
                out.delay_wint[i].push_back(
                    delay_weighted_integral(st.history(), i, s.t, specs.delays, cfg.quadrature));
                out.control[i].push_back(0.0);
                if (specs.gains.beta[i] != 0.0) E += 0.5 * std::abs(specs.gains.beta[i]) * di;
            }
            out.energy.push_back(E);
            maybe_sample(out, s, n, Nt);
        };
        record(0);
        try {
            for (long n = 0; n < Nt; ++n) {
                out.ledger.push_back(st.step());
                record(n + 1);
            }
        } catch (const SolverError& e) {
            if (!cfg.keep_partial) throw;
            mark_partial(out, e, st.state());
        }
        out.factorizations = st.factorizations();
    } else {
        ControlledStepper st(sys, cfg.dt, cfg.solver_tol);
        DiscreteState s = init.state;
        if (s.q.size() != sys.size() || s.p.size() != sys.size())
            throw std::invalid_argument("initial state does not match the dof layout");
        const double t0 = s.t;
        auto f_at = [&](long n) { return controls ? controls(t0 + n * cfg.dt) : ControlVec{0, 0, 0}; };
        ControlVec f0 = f_at(0);
        auto record = [&](long n, const ControlVec& f) {
            record_common(out, sys, s);
            out.energy.push_back(out.quad_energy.back());
            for (int i = 0; i < 3; ++i) {
                out.delayed[i].push_back(0.0);
                out.delay_int[i].push_back(0.0);
                out.delay_wint[i].push_back(0.0);
                out.control[i].push_back(f[i]);
            }
            maybe_sample(out, s, n, Nt);
        };
        record(0, f0);
        try {
            for (long n = 0; n < Nt; ++n) {
                const ControlVec f1 = f_at(n + 1);
                DiscreteState next = s;
                st.step(next, f0, f1);
                next.t = t0 + (n + 1) * cfg.dt;
                if (!next.finite()) throw SolverError("non-finite state", n + 1);
                s = std::move(next);
                out.ledger.push_back({});
                record(n + 1, f1);
                f0 = f1;
            }
        } catch (const SolverError& e) {
            if (!cfg.keep_partial) throw;
            mark_partial(out, e, s);
        }
        out.factorizations = 1;
    }
    return out;
}

std::string trajectory_csv(const SimOutput& out) {
    const bool A = out.variant == Variant::StabilizedDelayed;
    std::vector<std::string> head = {"t", "energy"};
    if (A) {
        for (auto c : {"u_t_L", "v_t_L", "w_tx_L", "z1", "z2", "z3"}) head.push_back(c);
    } else {
        for (auto c : {"u_L", "v_L", "w_L", "u_t_L", "v_t_L", "w_t_L", "f1", "f2", "f3"}) head.push_back(c);
    }
    CsvTable tab(head);
    for (long n : out.sample_step) {
        std::vector<double> row = {out.t[n], out.energy[n]};
        if (A) {
            for (int i = 0; i < 3; ++i) row.push_back(out.trace_vel[i][n]);
            for (int i = 0; i < 3; ++i) row.push_back(out.delayed[i][n]);
        } else {
            for (int i = 0; i < 3; ++i) row.push_back(out.trace_disp[i][n]);
            for (int i = 0; i < 3; ++i) row.push_back(out.trace_vel[i][n]);
            for (int i = 0; i < 3; ++i) row.push_back(out.control[i][n]);
        }
        tab.add(row);
    }
    return tab.str();
}

}  // namespace sandwich
