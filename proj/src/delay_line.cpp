#include "sandwich/delay_line.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sandwich/io.hpp"

namespace sandwich {

namespace {

// 4-point Gauss-Legendre on [-1,1]
constexpr double kGx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
constexpr double kGw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};

double hermite(const TraceHistory::Sample& a, const TraceHistory::Sample& b, double s, Interpolation mode) {
    const double h = b.t - a.t;
    const double r = (s - a.t) / h;
    if (mode == Interpolation::Linear || std::isnan(a.slope) || std::isnan(b.slope))
        return a.value + r * (b.value - a.value);
    const double r2 = r * r, r3 = r2 * r;
    return (2 * r3 - 3 * r2 + 1) * a.value + (r3 - 2 * r2 + r) * h * a.slope + (-2 * r3 + 3 * r2) * b.value +
           (r3 - r2) * h * b.slope;
}

double hermite_slope(const TraceHistory::Sample& a, const TraceHistory::Sample& b, double s, Interpolation mode) {
    const double h = b.t - a.t;
    const double r = (s - a.t) / h;
    if (mode == Interpolation::Linear || std::isnan(a.slope) || std::isnan(b.slope)) return (b.value - a.value) / h;
    const double r2 = r * r;
    return ((6 * r2 - 6 * r) * a.value + (-6 * r2 + 6 * r) * b.value) / h + (3 * r2 - 4 * r + 1) * a.slope +
           (3 * r2 - 2 * r) * b.slope;
}

}  // namespace

void TraceHistory::init_channel(int i, const ScalarFn& f, double tau_at0, const ScalarFn& df) {
    if (!(tau_at0 > 0)) throw std::invalid_argument("initial delay must be positive");
    auto& c = ch_.at(i);
    c.clear();
    const double h = tau_at0 / kInitialSamples;
    auto cell_mean = [&](double lo) {
        double m = 0;
        for (int g = 0; g < 4; ++g) m += 0.5 * kGw[g] * f(lo + 0.5 * h * (1.0 + kGx[g]));
        return m;
    };
    for (int k = 0; k < kInitialSamples; ++k) {
        const double s = -tau_at0 + k * h;
        const double mean = k == 0 ? std::numeric_limits<double>::quiet_NaN() : cell_mean(s - h);
        c.push_back({s, f(s), df ? df(s) : std::numeric_limits<double>::quiet_NaN(), mean});
    }
    pending_mean_[i] = cell_mean(-h);
}

void TraceHistory::push(int i, double t, double value, double slope, double mean) {
    auto& c = ch_.at(i);
    if (!c.empty() && !(t > c.back().t)) {
        std::ostringstream os;
        os << "history push at t=" << t << " not after last sample t=" << c.back().t;
        throw std::invalid_argument(os.str());
    }
    const double dt = c.empty() ? 0.0 : t - c.back().t;
    if (std::isnan(mean) && !c.empty()) {
        if (!std::isnan(pending_mean_[i])) {
            mean = pending_mean_[i];
        } else {
            const Sample b{t, value, slope};
            mean = 0;
            for (int g = 0; g < 4; ++g)
                mean += 0.5 * kGw[g] * hermite(c.back(), b, c.back().t + 0.5 * dt * (1.0 + kGx[g]), mode);
        }
    }
    pending_mean_[i] = std::numeric_limits<double>::quiet_NaN();
    c.push_back({t, value, slope, mean});
    const double cutoff = t - retention_[i] - 2.0 * dt;
    // keep the sample straddling the cutoff so that lookups at t - M stay interpolable
    while (c.size() > 2 && c[1].t <= cutoff) c.pop_front();
}

double TraceHistory::first_time(int i) const {
    if (ch_.at(i).empty()) throw std::logic_error("history channel not initialized");
    return ch_[i].front().t;
}

double TraceHistory::last_time(int i) const {
    if (ch_.at(i).empty()) throw std::logic_error("history channel not initialized");
    return ch_[i].back().t;
}

double TraceHistory::last_value(int i) const {
    if (ch_.at(i).empty()) throw std::logic_error("history channel not initialized");
    return ch_[i].back().value;
}

std::size_t TraceHistory::segment(int i, double s) const {
    const auto& c = ch_.at(i);
    if (c.empty()) throw std::logic_error("history channel not initialized");
    const double tol = 1e-12 * std::max(1.0, std::abs(s));
    if (s < c.front().t - tol) {
        std::ostringstream os;
        os << "lookup at " << s << " before history start " << c.front().t << " (channel " << i + 1 << ")";
        throw LookupBeforeHistory(os.str());
    }
    if (s > c.back().t + tol) {
        std::ostringstream os;
        os << "lookup at " << s << " after last sample " << c.back().t << " (channel " << i + 1 << ")";
        throw LookupAfterHistory(os.str());
    }
    if (c.size() == 1) return 0;
    auto it = std::upper_bound(c.begin(), c.end(), s, [](double v, const Sample& x) { return v < x.t; });
    std::size_t k = it == c.begin() ? 0 : static_cast<std::size_t>(it - c.begin()) - 1;
    return std::min(k, c.size() - 2);
}

double TraceHistory::lookup(int i, double s) const {
    const auto& c = ch_.at(i);
    const std::size_t k = segment(i, s);
    if (c.size() == 1) return c[0].value;
    if (s == c[k].t) return c[k].value;
    if (s == c[k + 1].t) return c[k + 1].value;
    return hermite(c[k], c[k + 1], std::clamp(s, c[k].t, c[k + 1].t), mode);
}

double TraceHistory::lookup_slope(int i, double s) const {
    const auto& c = ch_.at(i);
    const std::size_t k = segment(i, s);
    if (c.size() == 1) return 0.0;
    return hermite_slope(c[k], c[k + 1], std::clamp(s, c[k].t, c[k + 1].t), mode);
}

double TraceHistory::integral_impl(int i, double a, double b, bool ramp) const {
    if (b <= a) return 0.0;
    const auto& c = ch_.at(i);
    std::size_t k = segment(i, a);
    segment(i, b);
    double total = 0.0;
    for (; k + 1 < c.size() && c[k].t < b; ++k) {
        const double lo = std::max(a, c[k].t), hi = std::min(b, c[k + 1].t);
        if (hi <= lo) continue;
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (int g = 0; g < 4; ++g) {
            const double s = mid + half * kGx[g];
            const double y = hermite(c[k], c[k + 1], s, mode);
            const double w = ramp ? (s - a) / (b - a) : 1.0;
            total += half * kGw[g] * w * y * y;
        }
    }
    return total;
}

double TraceHistory::integral_sq(int i, double a, double b) const { return integral_impl(i, a, b, false); }

double TraceHistory::cell_impl(int i, double a, double b, int power, bool ramp) const {
    if (b <= a) return 0.0;
    const auto& c = ch_.at(i);
    std::size_t k = segment(i, a);
    segment(i, b);
    double total = 0.0;
    for (; k + 1 < c.size() && c[k].t < b; ++k) {
        const double lo = std::max(a, c[k].t), hi = std::min(b, c[k + 1].t);
        if (hi <= lo) continue;
        const double m = c[k + 1].mean;
        const double v = power == 1 ? m : m * m;
        const double w = ramp ? ((hi - a) * (hi - a) - (lo - a) * (lo - a)) / (2.0 * (b - a)) : hi - lo;
        total += w * v;
    }
    return total;
}

double TraceHistory::cell_integral(int i, double a, double b) const { return cell_impl(i, a, b, 1, false); }
double TraceHistory::cell_integral_sq(int i, double a, double b) const { return cell_impl(i, a, b, 2, false); }
double TraceHistory::cell_integral_sq_ramp(int i, double a, double b) const { return cell_impl(i, a, b, 2, true); }

double TraceHistory::cell_average(int i, double a, double b) const {
    if (!(b > a)) throw std::invalid_argument("cell average over an empty interval");
    return cell_integral(i, a, b) / (b - a);
}

double TraceHistory::integral_sq_ramp(int i, double a, double b) const { return integral_impl(i, a, b, true); }

TraceHistory init_history(int i, const ScalarFn& f, double tau_at0, const ScalarFn& df) {
    TraceHistory h;
    h.init_channel(i, f, tau_at0, df);
    return h;
}

void push(TraceHistory& h, int i, double t, double value, double slope, double mean) {
    h.push(i, t, value, slope, mean);
}

double delayed_argument(int i, double t, const DelaySpec& delays) { return t - delays[i](t); }

double eval_delayed(const TraceHistory& h, int i, double t, const DelaySpec& delays) {
    return h.lookup(i, delayed_argument(i, t, delays));
}

std::vector<double> z_profile(const TraceHistory& h, int i, double t, const DelaySpec& delays, int n_panels) {
    if (n_panels < 1) throw std::invalid_argument("n_panels must be positive");
    const double tau = delays[i](t);
    std::vector<double> z(n_panels + 1);
    for (int k = 0; k <= n_panels; ++k) {
        const double rho = static_cast<double>(k) / n_panels;
        z[k] = k == 0 ? h.lookup(i, t) : h.lookup(i, t - tau * rho);
    }
    return z;
}

void write_history_csv(const std::string& path, const TraceHistory& h, int i) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "t,value,slope,mean\n";
    for (const auto& s : h.samples(i))
        out << format_number(s.t) << ',' << format_number(s.value) << ',' << format_number(s.slope) << ','
            << format_number(s.mean) << '\n';
}

}  // namespace sandwich
