#pragma once

#include <string>
#include <vector>

#include "sandwich/integrator.hpp"
#include "sandwich/model.hpp"

namespace sandwich {

struct LinearFit {
    double omega = 0;      // decay rate, -slope of ln E
    double intercept = 0;  // ln E at t = 0 on the fitted line
    double r2 = 0;
    int points = 0;
};

struct DecayReport {
    LinearFit fit;
    double window_begin = 0, window_end = 0;
    double theoretical_rate = 0;  // lambda / (1 + mu4)
    double zeta = 1;
    long bound_violations = 0;
    double max_residual = 0;      // dissipation identity
    TheoreticalRates rates;

    std::string to_json() const;
};

// |(E_{n+1} - E_n)/dt - midpoint right side| for every step.
std::vector<double> check_dissipation_identity(const SimOutput& out);

// L = E + mu0 * cross + sum mu_i |beta_i|/2 * tau_i int (1-rho) z_i^2, per step.
std::vector<double> lyapunov_trace(const SimOutput& out, const TheoreticalRates& rates, const GainConfig& gains);

// Least squares of ln E against t over [t0, t1]; samples below floor * E(0) are skipped.
LinearFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& E, double t0, double t1,
                         double floor = 1e-14);

// Fit window defaults to [0.2 T, 0.9 T] when begin >= end.
DecayReport check_theoretical_bound(const SimOutput& out, const TheoreticalRates& rates, double slack = 1.05,
                                    double window_begin = 0, double window_end = 0);

struct TraceEstimateReport {
    // observed boundary dissipation against initial energy data
    double trace_lhs = 0, trace_rhs = 0;
    // initial-data estimate
    double initial_lhs = 0, initial_rhs = 0;
    // same left side against E(0) / lambda_min of -Phi/2 (the constant the
    // literal form hides)
    double trace_rhs_scaled = 0;

    double trace_slack() const { return trace_rhs - trace_lhs; }
    double initial_slack() const { return initial_rhs - initial_lhs; }
    bool pass() const { return trace_slack() >= 0 && initial_slack() >= 0; }
    std::string to_json() const;
};

TraceEstimateReport check_trace_estimates(const SimOutput& out, const SemiDiscreteSystem& sys,
                                          const ModelSpecs& specs);

// Time integral of a step series by the trapezoid rule.
double trapezoid(const std::vector<double>& t, const std::vector<double>& f);

// t, E, L, bound, residual (residual of the step ending at t; 0 in the first row).
std::string decay_csv(const SimOutput& out, const std::vector<double>& lyap, const TheoreticalRates& rates,
                      const std::vector<double>& residual);

}  // namespace sandwich
