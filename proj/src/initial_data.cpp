#include "sandwich/initial_data.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace sandwich {

double mode_shape(Variant v, int field, int m, double x, double L) {
    const double pi = std::numbers::pi;
    if (field < 2) return std::sin((m - 0.5) * pi * x / L);
    // vanishes with w_x at 0 and with w, w_xx at L
    if (v == Variant::StabilizedDelayed) return (1.0 - std::cos(2.0 * pi * m * x / L)) * (1.0 - x / L);
    return std::cos(m * pi * x / L);
}

double bump(double x, double center, double width) {
    const double r = (x - center) / width;
    if (std::abs(r) >= 1.0) return 0.0;
    const double c = std::cos(0.5 * std::numbers::pi * r);
    const double c2 = c * c, c4 = c2 * c2;
    return c4 * c4;
}

int field_index(const std::string& name) {
    if (name == "u") return 0;
    if (name == "v") return 1;
    if (name == "w") return 2;
    throw ConfigError("unknown field '" + name + "' (expected u, v or w)");
}

void sample_fields(const SemiDiscreteSystem& sys, Eigen::VectorXd& target,
                   const std::function<double(int, double)>& f) {
    const auto& lay = sys.layout;
    target.setZero(sys.size());
    for (int j = 0; j <= lay.N; ++j) {
        const double x = sys.grid.x(j);
        if (int d = lay.iu(j); d >= 0) target[d] = f(0, x);
        if (int d = lay.iv(j); d >= 0) target[d] = f(1, x);
        if (int d = lay.iw(j); d >= 0) target[d] = f(2, x);
    }
}

double uniform_pm1(std::mt19937_64& rng) {
    return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
}

DiscreteState random_smooth_state(const SemiDiscreteSystem& sys, std::mt19937_64& rng, int cutoff) {
    if (cutoff < 1) throw ConfigError("random_smooth cutoff must be >= 1");
    const Variant v = sys.variant();
    const double L = sys.grid.L;
    std::vector<double> cq(3 * cutoff), cp(3 * cutoff);
    for (auto& c : cq) c = uniform_pm1(rng);
    for (auto& c : cp) c = uniform_pm1(rng);
    auto modal = [&](const std::vector<double>& c) {
        return [&, v, L](int field, double x) {
            double s = 0;
            for (int m = 1; m <= cutoff; ++m) s += c[field * cutoff + m - 1] / (m * m) * mode_shape(v, field, m, x, L);
            return s;
        };
    };
    DiscreteState s = DiscreteState::zero(sys);
    sample_fields(sys, s.q, modal(cq));
    sample_fields(sys, s.p, modal(cp));
    return s;
}

DiscreteState make_state(const InitialPreset& p, const SemiDiscreteSystem& sys) {
    DiscreteState s = DiscreteState::zero(sys);
    const double L = sys.grid.L;
    if (p.kind == "zero") return s;
    if (p.kind == "single_mode") {
        const int f = field_index(p.field);
        if (p.mode < 1) throw ConfigError("mode index must be >= 1");
        sample_fields(sys, s.q, [&](int field, double x) {
            return field == f ? p.amplitude * mode_shape(sys.variant(), field, p.mode, x, L) : 0.0;
        });
        return s;
    }
    if (p.kind == "random_smooth") {
        std::mt19937_64 rng(p.seed);
        return random_smooth_state(sys, rng, p.cutoff);
    }
    if (p.kind == "bump") {
        const int f = field_index(p.field);
        if (!(p.width > 0)) throw ConfigError("bump width must be positive");
        sample_fields(sys, s.q, [&](int field, double x) {
            return field == f ? p.amplitude * bump(x, p.center * L, p.width * L) : 0.0;
        });
        return s;
    }
    throw ConfigError("unknown initial preset '" + p.kind + "'");
}

}  // namespace sandwich
