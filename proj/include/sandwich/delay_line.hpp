#pragma once

#include <array>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sandwich/model.hpp"

namespace sandwich {

class LookupBeforeHistory : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class LookupAfterHistory : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

enum class Interpolation { Hermite, Linear };

using ScalarFn = std::function<double(double)>;

// Stored boundary traces of the three delayed channels
// (u_t(L,.), v_t(L,.), w_tx(L,.)).  Lookups interpolate between samples.
// Each sample also carries the mean of the trace over the segment that
// ends at it; the integrator feeds back and integrates these cell means.
class TraceHistory {
public:
    struct Sample {
        double t, value, slope;  // slope NaN when unknown
        double mean = std::numeric_limits<double>::quiet_NaN();  // over (previous t, t]
    };

    static constexpr int kInitialSamples = 64;

    Interpolation mode = Interpolation::Hermite;

    // Samples f on [-tau_at0, 0) at kInitialSamples uniform points.
    void init_channel(int i, const ScalarFn& f, double tau_at0, const ScalarFn& df = nullptr);
    void set_retention(int i, double horizon) { retention_.at(i) = horizon; }

    // A NaN mean is replaced by the 4-point Gauss average of the interpolant.
    void push(int i, double t, double value, double slope = std::numeric_limits<double>::quiet_NaN(),
              double mean = std::numeric_limits<double>::quiet_NaN());

    double lookup(int i, double s) const;
    double lookup_slope(int i, double s) const;
    // Exact integrals over [a,b] of y^2 and of ((s-a)/(b-a)) y^2 on the interpolant.
    double integral_sq(int i, double a, double b) const;
    double integral_sq_ramp(int i, double a, double b) const;
    // Same integrals for the piecewise-constant cell means.
    double cell_integral(int i, double a, double b) const;
    double cell_integral_sq(int i, double a, double b) const;
    double cell_integral_sq_ramp(int i, double a, double b) const;
    // Mean of the cell function over [a, b].
    double cell_average(int i, double a, double b) const;

    bool initialized(int i) const { return !ch_.at(i).empty(); }
    double first_time(int i) const;
    double last_time(int i) const;
    double last_value(int i) const;
    const std::deque<Sample>& samples(int i) const { return ch_.at(i); }

private:
    std::array<std::deque<Sample>, 3> ch_;
    std::array<double, 3> retention_{std::numeric_limits<double>::infinity(),
                                     std::numeric_limits<double>::infinity(),
                                     std::numeric_limits<double>::infinity()};
    // initial-function mean of the cell closed by the first push, NaN after it
    std::array<double, 3> pending_mean_{std::numeric_limits<double>::quiet_NaN(),
                                        std::numeric_limits<double>::quiet_NaN(),
                                        std::numeric_limits<double>::quiet_NaN()};
    std::size_t segment(int i, double s) const;
    double integral_impl(int i, double a, double b, bool ramp) const;
    double cell_impl(int i, double a, double b, int power, bool ramp) const;
};

TraceHistory init_history(int i, const ScalarFn& f, double tau_at0, const ScalarFn& df = nullptr);
void push(TraceHistory& h, int i, double t, double value,
          double slope = std::numeric_limits<double>::quiet_NaN(),
          double mean = std::numeric_limits<double>::quiet_NaN());

// theta_i(t) = t - tau_i(t)
double delayed_argument(int i, double t, const DelaySpec& delays);
double eval_delayed(const TraceHistory& h, int i, double t, const DelaySpec& delays);
std::vector<double> z_profile(const TraceHistory& h, int i, double t, const DelaySpec& delays, int n_panels);

void write_history_csv(const std::string& path, const TraceHistory& h, int i);

}  // namespace sandwich
