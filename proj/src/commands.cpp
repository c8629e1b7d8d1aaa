#include "sandwich/commands.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <nlohmann/json.hpp>

#include "sandwich/convergence.hpp"
#include "sandwich/hum.hpp"
#include "sandwich/io.hpp"
#include "sandwich/stabilization.hpp"

namespace sandwich {

using json = nlohmann::ordered_json;

namespace {

// JSON has no non-finite numbers; they become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void say(const RunContext& ctx, const std::string& line) {
    if (ctx.log && !ctx.quiet) *ctx.log << line << '\n';
}

// Failures are reported even under --quiet.
void complain(const RunContext& ctx, const std::string& line) {
    if (ctx.log) *ctx.log << line << '\n';
}

json manifest(const std::string& command, const ScenarioConfig& c) {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                    "." + std::to_string(EIGEN_MINOR_VERSION)},
                      {"boost", BOOST_LIB_VERSION},
                      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    m["config_hash"] = c.hash();
    m["variant"] = to_string(c.variant);
    m["N"] = c.N;
    m["dt"] = c.scheme.dt;
    m["T"] = c.scheme.T;
    m["seed"] = c.initial.seed;
    m["status"] = "ok";
    m["invariants"] = json::object();
    m["files"] = json::array();
    return m;
}

void emit(const RunContext& ctx, json& m, const std::string& name, const std::string& text) {
    write_file(ctx.out / name, text);
    m["files"].push_back(name);
}

void write_manifest(const RunContext& ctx, const json& m) { write_file(ctx.out / "manifest.json", m.dump(2) + "\n"); }

json report_json(const HypothesisReport& rep) {
    json arr = json::array();
    for (const auto& e : rep.entries)
        arr.push_back({{"condition_id", e.condition_id},
                       {"lhs", num(e.lhs)},
                       {"rhs", num(e.rhs)},
                       {"margin", num(e.margin)},
                       {"pass", e.pass}});
    return arr;
}

void append(HypothesisReport& to, const HypothesisReport& from) {
    to.entries.insert(to.entries.end(), from.entries.begin(), from.entries.end());
}

// Delay and damping checks, then the gain thresholds when d is admissible.
HypothesisReport hypotheses(const ScenarioConfig& c) {
    HypothesisReport rep;
    if (c.variant != Variant::StabilizedDelayed) return rep;
    append(rep, validate_delays(c.specs.delays));
    append(rep, validate_damping(c.specs.damping));
    try {
        append(rep, validate_gains(c.params, c.specs.gains, c.specs.delays));
    } catch (const HypothesisViolation&) {
        // already recorded by the delay checks
    }
    return rep;
}

void require_variant(const ScenarioConfig& c, Variant v, const std::string& command) {
    if (c.variant != v) throw ConfigError(command + " needs run.variant = " + to_string(v));
}

}  // namespace

int cmd_validate(const ScenarioConfig& c, const RunContext& ctx) {
    const auto rep = hypotheses(c);
    json j;
    j["pass"] = rep.all_pass();
    j["first_failure"] = rep.first_failure();
    j["entries"] = report_json(rep);
    json m = manifest("validate", c);
    m["invariants"]["hypotheses_pass"] = rep.all_pass();
    emit(ctx, m, "validate.json", j.dump(2) + "\n");
    write_manifest(ctx, m);
    if (!rep.all_pass()) {
        say(ctx, "hypothesis failed: " + rep.first_failure());
        return kExitCriterion;
    }
    say(ctx, "all " + std::to_string(rep.entries.size()) + " hypotheses hold");
    return kExitOk;
}

int cmd_simulate(const ScenarioConfig& c, const RunContext& ctx) {
    const auto sys = c.system();
    SchemeConfig scheme = c.scheme;
    scheme.keep_partial = true;
    const SimOutput out = simulate(c.initial_data(sys), sys, scheme, c.specs);

    json m = manifest("simulate", c);
    auto& inv = m["invariants"];
    const double E0 = out.energy.front();
    bool finite = true;
    double drift = 0, increase = 0;
    for (std::size_t n = 0; n < out.energy.size(); ++n) {
        finite = finite && std::isfinite(out.energy[n]);
        drift = std::max(drift, std::abs(out.energy[n] - E0));
        if (n) increase = std::max(increase, out.energy[n] - out.energy[n - 1]);
    }
    const double scale = E0 > 0 ? E0 : 1.0;
    inv["finite"] = finite;
    inv["initial_energy"] = num(E0);
    if (c.variant == Variant::ControlledConservative) {
        inv["relative_energy_drift"] = num(drift / scale);
        inv["conservative"] = drift <= 1e-8 * scale;
    } else {
        inv["max_relative_energy_increase"] = num(increase / scale);
        inv["monotone_energy"] = increase <= 1e-10 * scale;
        if (!out.ledger.empty()) {
            const auto r = check_dissipation_identity(out);
            inv["max_dissipation_residual"] = num(*std::max_element(r.begin(), r.end()));
        }
    }
    emit(ctx, m, "trajectory.csv", trajectory_csv(out));
    if (out.partial()) {
        m["status"] = "partial";
        m["failure"] = out.failure;
        m["partial_csv"] = true;
        write_manifest(ctx, m);
        say(ctx, "solver failure: " + out.failure + " (trajectory.csv is partial)");
        return kExitSolver;
    }
    write_manifest(ctx, m);
    say(ctx, "simulated " + std::to_string(out.steps()) + " steps, E(T)/E(0) = " +
                 format_number(E0 > 0 ? out.energy.back() / E0 : 0.0));
    return kExitOk;
}

int cmd_decay_report(const ScenarioConfig& c, const RunContext& ctx) {
    require_variant(c, Variant::StabilizedDelayed, "decay-report");
    json m = manifest("decay-report", c);
    TheoreticalRates rates;
    try {
        rates = select_mus(c.params, c.specs.delays, c.specs.damping, c.specs.gains, c.decay.mu4_cap);
    } catch (const InfeasibleRates& e) {
        json j;
        j["feasible"] = false;
        j["binding_constraint"] = e.binding_constraint;
        j["message"] = e.what();
        m["status"] = "infeasible";
        m["invariants"]["feasible"] = false;
        emit(ctx, m, "decay.json", j.dump(2) + "\n");
        write_manifest(ctx, m);
        say(ctx, std::string("no admissible rates: ") + e.what());
        return kExitCriterion;
    }
    const auto sys = c.system();
    const SimOutput out = simulate(c.initial_data(sys), sys, c.scheme, c.specs);
    const auto rep = check_theoretical_bound(out, rates, c.decay.slack, c.decay.window_begin, c.decay.window_end);
    const auto lyap = lyapunov_trace(out, rates, c.specs.gains);
    const auto residual = check_dissipation_identity(out);
    const auto trace = check_trace_estimates(out, sys, c.specs);

    long lyap_bad = 0;
    double increase = 0;
    for (std::size_t n = 0; n < lyap.size(); ++n) {
        const double E = out.energy[n];
        if (lyap[n] < (1 - rates.mu4) * E || lyap[n] > (1 + rates.mu4) * E) ++lyap_bad;
        if (n) increase = std::max(increase, out.energy[n] - out.energy[n - 1]);
    }
    const double E0 = out.energy.front();
    const bool monotone = increase <= 1e-10 * (E0 > 0 ? E0 : 1.0);
    const bool rate_ok = E0 == 0 || rep.fit.omega >= c.decay.rate_fraction * rep.theoretical_rate;

    json j = json::parse(rep.to_json());
    j["feasible"] = true;
    j["lyapunov_equivalence_violations"] = lyap_bad;
    j["monotone_energy"] = monotone;
    j["rate_ok"] = rate_ok;
    j["trace_estimates"] = json::parse(trace.to_json());
    j["hypotheses"] = report_json(hypotheses(c));
    const bool pass = rep.bound_violations == 0 && rate_ok && lyap_bad == 0 && monotone;
    j["pass"] = pass;

    auto& inv = m["invariants"];
    inv["feasible"] = true;
    inv["bound_violations"] = rep.bound_violations;
    inv["rate_ok"] = rate_ok;
    inv["monotone_energy"] = monotone;
    inv["lyapunov_equivalence"] = lyap_bad == 0;
    inv["trace_estimates"] = trace.pass();
    emit(ctx, m, "decay.json", j.dump(2) + "\n");
    emit(ctx, m, "decay.csv", decay_csv(out, lyap, rates, residual));
    write_manifest(ctx, m);
    say(ctx, "fitted rate " + format_number(rep.fit.omega) + " vs bound exponent " +
                 format_number(rep.theoretical_rate) + ", violations " + std::to_string(rep.bound_violations));
    return pass ? kExitOk : kExitCriterion;
}

int cmd_hum(const ScenarioConfig& c, const RunContext& ctx) {
    require_variant(c, Variant::ControlledConservative, "hum");
    const auto sys = c.system();
    const HumProblem prob(sys, c.hum.cfg);
    const DiscreteState U0 = make_state(c.initial, sys);
    json m = manifest("hum", c);
    m["hum"] = {{"horizon", prob.horizon()},
                {"dt", c.hum.cfg.dt},
                {"cg_tol", c.hum.cfg.cg_tol},
                {"method", c.hum.cfg.conjugate_residual ? "cr" : "cg"},
                {"precondition", c.hum.cfg.precondition}};
    HumSolution sol;
    try {
        sol = compute_null_control(U0, prob);
    } catch (const CgError& e) {
        m["status"] = "cg_failure";
        m["failure"] = e.what();
        m["failure_iteration"] = e.iteration;
        write_manifest(ctx, m);
        say(ctx, std::string("CG failure: ") + e.what());
        return kExitSolver;
    }
    const bool reached = sol.terminal_relative_norm <= c.hum.terminal_tol;
    auto& inv = m["invariants"];
    inv["terminal_relative_norm"] = num(sol.terminal_relative_norm);
    inv["terminal_reached"] = reached;
    inv["cg_converged"] = sol.converged;
    emit(ctx, m, "hum.json", sol.to_json() + "\n");
    emit(ctx, m, "controls.csv", sol.controls_csv());
    say(ctx, "terminal relative norm " + format_number(sol.terminal_relative_norm) + " after " +
                 std::to_string(sol.iterations) + " iterations");
    if (reached) {
        write_manifest(ctx, m);
        return kExitOk;
    }
    m["status"] = sol.converged ? "terminal_not_reached" : "cg_not_converged";
    write_manifest(ctx, m);
    return sol.converged ? kExitCriterion : kExitSolver;
}

int cmd_observability(const ScenarioConfig& c, const RunContext& ctx) {
    require_variant(c, Variant::ControlledConservative, "observability");
    const auto& o = c.observability;
    json j;
    double max_prev = 0, min_all = std::numeric_limits<double>::infinity(), ratio = 0;
    bool finite = true;
    for (int N : {c.N, 2 * c.N}) {
        const auto sys = c.system(N);
        const HumProblem prob(sys, c.hum.cfg);
        const auto est = estimate_observability(prob, o.samples, o.seed, o.cutoff);
        j["levels"].push_back(
            {{"N", N}, {"min_quotient", num(est.min_quotient)}, {"max_quotient", num(est.max_quotient)},
             {"samples", est.samples}});
        finite = finite && std::isfinite(est.max_quotient);
        min_all = std::min(min_all, est.min_quotient);
        if (max_prev > 0) ratio = est.max_quotient / max_prev;
        max_prev = est.max_quotient;
    }
    const bool stable = std::abs(ratio - 1.0) <= 0.1;
    const bool pass = min_all > 0 && finite && stable;
    j["max_refinement_ratio"] = num(ratio);
    j["pass"] = pass;
    json m = manifest("observability", c);
    m["invariants"] = {{"min_positive", min_all > 0}, {"max_finite", finite}, {"max_stable", stable}};
    emit(ctx, m, "observability.json", j.dump(2) + "\n");
    write_manifest(ctx, m);
    say(ctx, "min quotient " + format_number(min_all) + ", max refinement ratio " + format_number(ratio));
    return pass ? kExitOk : kExitCriterion;
}

int cmd_convergence(const ScenarioConfig& c, const RunContext& ctx) {
    const auto tab = convergence_study(c);
    json m = manifest("convergence", c);
    m["invariants"]["flags"] = tab.flags;
    for (const char* kind : {"spatial", "temporal"}) {
        const auto o = tab.orders(kind);
        if (!o.empty()) m["invariants"][std::string(kind) + "_orders"] = o;
    }
    emit(ctx, m, "convergence.csv", tab.csv());
    write_manifest(ctx, m);
    for (const auto& f : tab.flags) say(ctx, "flagged: " + f);
    return tab.flagged() ? kExitCriterion : kExitOk;
}

int run_command(const std::string& name, const ScenarioConfig& c, const RunContext& ctx) {
    try {
        if (name == "validate") return cmd_validate(c, ctx);
        if (name == "simulate") return cmd_simulate(c, ctx);
        if (name == "decay-report") return cmd_decay_report(c, ctx);
        if (name == "hum") return cmd_hum(c, ctx);
        if (name == "observability") return cmd_observability(c, ctx);
        if (name == "convergence") return cmd_convergence(c, ctx);
        throw ConfigError("unknown command '" + name + "'");
    } catch (const ConfigError& e) {
        complain(ctx, std::string("config error: ") + e.what());
        return kExitConfig;
    } catch (const HypothesisViolation& e) {
        complain(ctx, "hypothesis failed: " + e.condition_id);
        return kExitCriterion;
    } catch (const InfeasibleRates& e) {
        complain(ctx, std::string("no admissible rates: ") + e.what());
        return kExitCriterion;
    } catch (const SolverError& e) {
        complain(ctx, std::string("solver failure: ") + e.what());
        return kExitSolver;
    } catch (const CgError& e) {
        complain(ctx, std::string("CG failure: ") + e.what());
        return kExitSolver;
    } catch (const std::invalid_argument& e) {
        complain(ctx, std::string("invalid input: ") + e.what());
        return kExitConfig;
    }
}

}  // namespace sandwich
