#include "sandwich/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sandwich/io.hpp"

namespace sandwich {

namespace pt = boost::property_tree;

ScalarFn HistorySpec::value() const {
    if (kind == "zero") return [](double) { return 0.0; };
    const double A = amplitude, w = frequency;
    return [A, w](double s) { return A * std::sin(w * s); };
}

ScalarFn HistorySpec::slope() const {
    if (kind == "zero") return [](double) { return 0.0; };
    const double A = amplitude, w = frequency;
    return [A, w](double s) { return A * w * std::cos(w * s); };
}

SemiDiscreteSystem ScenarioConfig::system(int n) const { return build_system(Grid1D(n, params.L), params, variant); }

InitialData ScenarioConfig::initial_data(const SemiDiscreteSystem& sys) const {
    InitialData init = make_initial(make_state(initial, sys));
    if (variant == Variant::StabilizedDelayed && history.kind != "zero") {
        for (int i = 0; i < 3; ++i) {
            init.history[i] = history.value();
            init.history_slope[i] = history.slope();
        }
    }
    return init;
}

std::string ScenarioConfig::hash() const { return hex64(fnv1a64(canonical)); }

void ScenarioConfig::override_seed(std::uint64_t seed) {
    initial.seed = seed;
    observability.seed = seed;
    canonical += "override.seed=" + std::to_string(seed) + "\n";
}

void ScenarioConfig::override_stride(int stride) {
    if (stride < 1) throw ConfigError("stride must be >= 1");
    scheme.stride = stride;
    canonical += "override.stride=" + std::to_string(stride) + "\n";
}

namespace {

const std::map<std::string, std::set<std::string>> kSchema = {
    {"model", {"rho1h1", "E1h1", "rho3h3", "E3h3", "rhoh", "EI", "k", "alpha", "L"}},
    {"layers", {"rho", "h", "E", "I"}},
    {"run", {"variant", "N", "dt", "T", "stride", "output_dir"}},
    {"gains", {"alpha", "beta"}},
    {"delay", {"kind", "tau", "mean", "amplitude", "frequency", "tau0", "M", "d"}},
    {"damping", {"kind", "a", "floor", "initial", "rate", "a0"}},
    {"initial", {"preset", "field", "mode", "amplitude", "seed", "cutoff", "center", "width"}},
    {"history", {"kind", "amplitude", "frequency"}},
    {"decay", {"window_begin", "window_end", "slack", "mu4_cap", "rate_fraction"}},
    {"hum", {"T", "dt", "cg_tol", "max_iterations", "method", "precondition", "tikhonov", "terminal_tol"}},
    {"observability", {"samples", "cutoff", "seed"}},
    {"convergence", {"mode", "levels", "reference", "temporal_N", "dt_levels", "dt_reference_factor"}},
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

class Section {
public:
    Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

    bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }
    std::string raw(const std::string& key) const { return trim(tree_->get<std::string>(key)); }

    std::string str(const std::string& key, const std::string& fallback) const {
        return has(key) ? raw(key) : fallback;
    }
    double num(const std::string& key, double fallback) const { return has(key) ? to_double(key, raw(key)) : fallback; }
    long integer(const std::string& key, long fallback) const {
        return has(key) ? to_long(key, raw(key)) : fallback;
    }
    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto v = raw(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError(where(key) + ": expected true or false, got '" + v + "'");
    }
    // One value broadcast to all channels, or exactly three.
    std::array<double, 3> triple(const std::string& key, std::array<double, 3> fallback) const {
        if (!has(key)) return fallback;
        const auto items = split_list(raw(key));
        if (items.size() == 1) {
            const double v = to_double(key, items[0]);
            return {v, v, v};
        }
        if (items.size() != 3) throw ConfigError(where(key) + ": expected 1 or 3 values");
        return {to_double(key, items[0]), to_double(key, items[1]), to_double(key, items[2])};
    }
    std::vector<double> doubles(const std::string& key, std::vector<double> fallback) const {
        if (!has(key)) return fallback;
        std::vector<double> out;
        for (const auto& it : split_list(raw(key))) out.push_back(to_double(key, it));
        return out;
    }
    std::vector<int> ints(const std::string& key, std::vector<int> fallback) const {
        if (!has(key)) return fallback;
        std::vector<int> out;
        for (const auto& it : split_list(raw(key))) out.push_back(static_cast<int>(to_long(key, it)));
        return out;
    }

private:
    std::string where(const std::string& key) const { return name_ + "." + key; }

    double to_double(const std::string& key, const std::string& v) const {
        double x = 0;
        const auto* end = v.data() + v.size();
        auto [ptr, ec] = std::from_chars(v.data(), end, x);
        if (ec != std::errc() || ptr != end || !std::isfinite(x))
            throw ConfigError(where(key) + ": not a finite number: '" + v + "'");
        return x;
    }
    long to_long(const std::string& key, const std::string& v) const {
        long x = 0;
        const auto* end = v.data() + v.size();
        auto [ptr, ec] = std::from_chars(v.data(), end, x);
        if (ec != std::errc() || ptr != end) throw ConfigError(where(key) + ": not an integer: '" + v + "'");
        return x;
    }

    std::string name_;
    const pt::ptree* tree_;
};

pt::ptree read_tree(const std::string& text) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return tree;
}

std::string canonical_text(const pt::ptree& tree) {
    std::map<std::string, std::string> flat;
    for (const auto& [sec, body] : tree)
        for (const auto& [key, val] : body) flat[sec + "." + key] = trim(val.data());
    std::string s;
    for (const auto& [k, v] : flat) s += k + "=" + v + "\n";
    return s;
}

void check_keys(const pt::ptree& tree) {
    for (const auto& [sec, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("key '" + sec + "' outside of any section");
        const auto it = kSchema.find(sec);
        if (it == kSchema.end()) throw ConfigError("unknown section [" + sec + "]");
        for (const auto& [key, val] : body)
            if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in [" + sec + "]");
    }
}

Section section(const pt::ptree& tree, const std::string& name) {
    const auto it = tree.find(name);
    return Section(name, it == tree.not_found() ? nullptr : &it->second);
}

void parse_model(const pt::ptree& tree, ScenarioConfig& c) {
    const auto m = section(tree, "model");
    const auto ly = section(tree, "layers");
    const bool layered = tree.find("layers") != tree.not_found();
    if (layered) {
        for (const char* k : {"rho1h1", "E1h1", "rho3h3", "E3h3", "rhoh", "EI", "alpha"})
            if (m.has(k)) throw ConfigError(std::string("model.") + k + " conflicts with [layers]");
        LayerInputs in;
        in.rho = ly.triple("rho", {1, 1, 1});
        in.h = ly.triple("h", {1, 1, 1});
        in.E = ly.triple("E", {1, 1, 1});
        in.I = ly.triple("I", {1, 1, 1});
        c.params = PhysicalParams::from_layers(in, m.num("k", 1), m.num("L", 1));
    } else {
        auto& p = c.params;
        p.rho1h1 = m.num("rho1h1", p.rho1h1);
        p.E1h1 = m.num("E1h1", p.E1h1);
        p.rho3h3 = m.num("rho3h3", p.rho3h3);
        p.E3h3 = m.num("E3h3", p.E3h3);
        p.rhoh = m.num("rhoh", p.rhoh);
        p.EI = m.num("EI", p.EI);
        p.k = m.num("k", p.k);
        p.alpha = m.num("alpha", p.alpha);
        p.L = m.num("L", p.L);
    }
    c.params.validate();
}

void parse_delays(const Section& s, DelaySpec& delays) {
    const auto kind = s.str("kind", "constant");
    std::array<DelayFunction, 3> f;
    if (kind == "constant") {
        const auto tau = s.triple("tau", {1, 1, 1});
        for (int i = 0; i < 3; ++i) f[i] = ConstantDelay{tau[i]};
        for (const char* k : {"mean", "amplitude", "frequency"})
            if (s.has(k)) throw ConfigError(std::string("delay.") + k + " needs kind = sinusoidal");
    } else if (kind == "sinusoidal") {
        if (s.has("tau")) throw ConfigError("delay.tau needs kind = constant");
        const auto mean = s.triple("mean", {1, 1, 1}), amp = s.triple("amplitude", {0, 0, 0}),
                   freq = s.triple("frequency", {1, 1, 1});
        for (int i = 0; i < 3; ++i) f[i] = SinusoidalDelay{mean[i], amp[i], freq[i]};
    } else {
        throw ConfigError("delay.kind must be constant or sinusoidal, got '" + kind + "'");
    }
    std::array<double, 3> lo, hi, rate;
    for (int i = 0; i < 3; ++i) {
        lo[i] = tau_min(f[i]);
        hi[i] = tau_max(f[i]);
        rate[i] = tau_rate_max(f[i]);
    }
    const auto tau0 = s.triple("tau0", lo), M = s.triple("M", hi), d = s.triple("d", rate);
    for (int i = 0; i < 3; ++i) delays[i] = DelayChannel{f[i], tau0[i], M[i], d[i]};
}

void parse_damping(const Section& s, DampingSpec& damping) {
    const auto kind = s.str("kind", "constant");
    std::array<DampingFunction, 3> f;
    std::array<double, 3> inf{};
    if (kind == "constant") {
        const auto a = s.triple("a", {0, 0, 0});
        for (const char* k : {"floor", "initial", "rate"})
            if (s.has(k)) throw ConfigError(std::string("damping.") + k + " needs kind = exponential");
        for (int i = 0; i < 3; ++i) {
            f[i] = ConstantDamping{a[i]};
            inf[i] = a[i];
        }
    } else if (kind == "exponential") {
        if (s.has("a")) throw ConfigError("damping.a needs kind = constant");
        const auto fl = s.triple("floor", {0, 0, 0}), in = s.triple("initial", {0, 0, 0}),
                   r = s.triple("rate", {1, 1, 1});
        for (int i = 0; i < 3; ++i) {
            f[i] = ExponentialDamping{fl[i], in[i], r[i]};
            inf[i] = r[i] > 0 ? std::min(fl[i], in[i]) : in[i];
        }
    } else {
        throw ConfigError("damping.kind must be constant or exponential, got '" + kind + "'");
    }
    const auto a0 = s.triple("a0", inf);
    for (int i = 0; i < 3; ++i) damping[i] = DampingChannel{f[i], a0[i]};
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
    const pt::ptree tree = read_tree(text);
    check_keys(tree);
    ScenarioConfig c;
    c.canonical = canonical_text(tree);
    parse_model(tree, c);

    const auto run = section(tree, "run");
    c.variant = variant_from_string(run.str("variant", "A"));
    c.N = static_cast<int>(run.integer("N", c.N));
    c.scheme.dt = run.num("dt", c.scheme.dt);
    c.scheme.T = run.num("T", c.scheme.T);
    c.scheme.stride = static_cast<int>(run.integer("stride", c.scheme.stride));
    c.output_dir = run.str("output_dir", c.output_dir.string());
    if (c.N < 8) throw ConfigError("run.N must be >= 8");
    c.scheme.validate();

    const auto g = section(tree, "gains");
    c.specs.gains.alpha = g.triple("alpha", c.specs.gains.alpha);
    c.specs.gains.beta = g.triple("beta", c.specs.gains.beta);
    parse_delays(section(tree, "delay"), c.specs.delays);
    parse_damping(section(tree, "damping"), c.specs.damping);

    const auto in = section(tree, "initial");
    auto& ip = c.initial;
    ip.kind = in.str("preset", ip.kind);
    ip.field = in.str("field", ip.field);
    ip.mode = static_cast<int>(in.integer("mode", ip.mode));
    ip.amplitude = in.num("amplitude", ip.amplitude);
    const long seed = in.integer("seed", static_cast<long>(ip.seed));
    if (seed < 0) throw ConfigError("initial.seed must be nonnegative");
    ip.seed = static_cast<std::uint64_t>(seed);
    ip.cutoff = static_cast<int>(in.integer("cutoff", ip.cutoff));
    ip.center = in.num("center", ip.center);
    ip.width = in.num("width", ip.width);
    static const std::set<std::string> presets = {"zero", "single_mode", "random_smooth", "bump"};
    if (!presets.count(ip.kind)) throw ConfigError("unknown initial preset '" + ip.kind + "'");
    field_index(ip.field);
    if (ip.cutoff < 1) throw ConfigError("initial.cutoff must be >= 1");

    const auto h = section(tree, "history");
    c.history.kind = h.str("kind", c.history.kind);
    c.history.amplitude = h.num("amplitude", c.history.amplitude);
    c.history.frequency = h.num("frequency", c.history.frequency);
    if (c.history.kind != "zero" && c.history.kind != "sine")
        throw ConfigError("history.kind must be zero or sine, got '" + c.history.kind + "'");

    const auto d = section(tree, "decay");
    c.decay.window_begin = d.num("window_begin", c.decay.window_begin);
    c.decay.window_end = d.num("window_end", c.decay.window_end);
    c.decay.slack = d.num("slack", c.decay.slack);
    c.decay.mu4_cap = d.num("mu4_cap", c.decay.mu4_cap);
    c.decay.rate_fraction = d.num("rate_fraction", c.decay.rate_fraction);

    const auto hu = section(tree, "hum");
    auto& hc = c.hum.cfg;
    hc.T = hu.num("T", hc.T);
    hc.dt = hu.num("dt", hc.dt);
    hc.cg_tol = hu.num("cg_tol", hc.cg_tol);
    hc.max_iterations = static_cast<int>(hu.integer("max_iterations", hc.max_iterations));
    const auto method = hu.str("method", "cr");
    if (method != "cr" && method != "cg") throw ConfigError("hum.method must be cr or cg");
    hc.conjugate_residual = method == "cr";
    hc.precondition = hu.flag("precondition", hc.precondition);
    hc.tikhonov = hu.num("tikhonov", hc.tikhonov);
    c.hum.terminal_tol = hu.num("terminal_tol", c.hum.terminal_tol);
    if (!(hc.dt > 0) || hc.T < 0 || !(hc.cg_tol > 0) || hc.max_iterations < 1 || hc.tikhonov < 0)
        throw ConfigError("hum: dt, cg_tol > 0, T, tikhonov >= 0 and max_iterations >= 1 required");

    const auto ob = section(tree, "observability");
    c.observability.samples = static_cast<int>(ob.integer("samples", c.observability.samples));
    c.observability.cutoff = static_cast<int>(ob.integer("cutoff", c.observability.cutoff));
    c.observability.seed = static_cast<std::uint64_t>(ob.integer("seed", static_cast<long>(c.observability.seed)));
    if (c.observability.samples < 10) throw ConfigError("observability.samples must be >= 10");

    const auto cv = section(tree, "convergence");
    auto& co = c.convergence;
    const auto mode = cv.str("mode", "both");
    if (mode != "spatial" && mode != "temporal" && mode != "both")
        throw ConfigError("convergence.mode must be spatial, temporal or both");
    co.spatial = mode != "temporal";
    co.temporal = mode != "spatial";
    co.levels = cv.ints("levels", co.levels);
    co.reference = static_cast<int>(cv.integer("reference", co.reference));
    co.temporal_N = static_cast<int>(cv.integer("temporal_N", co.temporal_N));
    co.dt_levels = cv.doubles("dt_levels", co.dt_levels);
    co.dt_reference_factor = static_cast<int>(cv.integer("dt_reference_factor", co.dt_reference_factor));
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
    }
    return parse_config(text);
}

}  // namespace sandwich
