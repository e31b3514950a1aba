#include "ezsdu/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <regex>
#include <set>
#include <sstream>

#include "ezsdu/closed_form.hpp"
#include "ezsdu/error.hpp"
#include "ezsdu/experiments.hpp"
#include "ezsdu/lattice.hpp"
#include "ezsdu/solver.hpp"

namespace ezsdu {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
    throw Error(ErrorCode::ValidationError, field + " " + what);
}

json num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

const json& require_object(const json& parent, const std::string& key, const std::string& path) {
    if (!parent.contains(key)) invalid(path, "is required");
    const json& child = parent.at(key);
    if (!child.is_object()) invalid(path, "must be an object");
    return child;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& prefix) {
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) invalid(prefix.empty() ? key : prefix + "." + key, "is not a recognised field");
    }
}

double read_number(const json& obj, const std::string& key, const std::string& path, std::optional<double> fallback) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        invalid(path, "is required");
    }
    const json& v = obj.at(key);
    if (!v.is_number()) invalid(path, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) invalid(path, "must be finite");
    return x;
}

long long read_integer(const json& obj, const std::string& key, const std::string& path,
                       std::optional<long long> fallback) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        invalid(path, "is required");
    }
    const json& v = obj.at(key);
    if (!v.is_number_integer()) invalid(path, "must be an integer");
    return v.get<long long>();
}

// Typed access to experiment.params with defaults.
class Params {
public:
    explicit Params(const json& p) : p_(p) {}

    double number(const std::string& key, double fallback) const {
        return read_number(p_, key, "experiment.params." + key, fallback);
    }
    int integer(const std::string& key, int fallback) const {
        const long long v = read_integer(p_, key, "experiment.params." + key, fallback);
        if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
            invalid("experiment.params." + key, "is out of range");
        }
        return static_cast<int>(v);
    }
    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
        if (!p_.contains(key)) return fallback;
        const json& v = p_.at(key);
        if (!v.is_array() || v.empty()) invalid("experiment.params." + key, "must be a non-empty array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number() || !std::isfinite(x.get<double>())) {
                invalid("experiment.params." + key, "must contain finite numbers only");
            }
            out.push_back(x.get<double>());
        }
        return out;
    }
    std::string text(const std::string& key, const std::string& fallback, const std::set<std::string>& choices) const {
        if (!p_.contains(key)) return fallback;
        const json& v = p_.at(key);
        if (!v.is_string() || !choices.count(v.get<std::string>())) {
            std::string list;
            for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
            invalid("experiment.params." + key, "must be one of: " + list);
        }
        return v.get<std::string>();
    }
    bool has(const std::string& key) const { return p_.contains(key); }

private:
    const json& p_;
};

std::vector<double> default_horizons() {
    std::vector<double> h;
    for (int t = 10; t <= 100; t += 10) h.push_back(t);
    return h;
}

json fit_json(const LinearFit& f) {
    return {{"slope", num(f.slope)}, {"intercept", num(f.intercept)}, {"slope_se", num(f.slope_se)}, {"t_stat", num(f.t_stat)}};
}

TailClosure make_tail(const Scenario& s, const ProportionalStrategy& strat) {
    if (s.lattice.tail == "zero") return TailClosure::zero();
    return TailClosure::proportional(s.preferences, s.market, strat);
}

SolverOptions make_solver_options(const Scenario& s) {
    SolverOptions o;
    o.epsilon = s.solver.epsilon;
    o.tol = s.solver.tol;
    o.max_iter = s.solver.max_iter;
    return o;
}

// ---------------------------------------------------------------------------

ExperimentOutput run_aversion(const Scenario& s) {
    const Params p(s.params);
    const auto r = aversion_demos(s.preferences, p.number("y_low", 0.5), p.number("y_high", 1.5), p.number("c_first", 1.0),
                                  p.number("c_second", 2.0), p.number("switch_time", 10.0));
    CsvTable t({"quantity", "value"});
    const std::vector<std::pair<std::string, double>> rows{
        {"utility_random", r.utility_random}, {"utility_mean", r.utility_mean},     {"risk_gap", r.risk_gap},
        {"moment_ratio", r.moment_ratio},     {"average_level", r.average_level},   {"utility_stream", r.utility_stream},
        {"utility_average", r.utility_average}, {"temporal_gap", r.temporal_gap}};
    json summary;
    for (const auto& [k, v] : rows) {
        t.add_row({k, v});
        summary[k] = num(v);
    }
    summary["signs_as_expected"] = r.signs_as_expected;
    return {std::move(t), summary};
}

ExperimentOutput run_candidate(const Scenario& s) {
    const Params p(s.params);
    const double wealth = p.number("wealth", 1.0);
    if (!(wealth > 0.0)) invalid("experiment.params.wealth", "must be positive");
    const auto c = candidate_policy(s.preferences, s.market);
    const double H = H_nu(s.preferences.delta() * s.preferences.theta(), s.preferences, s.market, c.strategy());
    const std::vector<std::pair<std::string, double>> rows{
        {"theta", s.preferences.theta()}, {"rho", s.preferences.rho()},
        {"lambda", s.market.lambda()},    {"pi_hat", c.pi_hat},
        {"eta", c.eta},                   {"value_coefficient", c.value_coefficient},
        {"wealth", wealth},               {"value", c.value(wealth)},
        {"H_delta_theta", H}};
    CsvTable t({"quantity", "value"});
    json summary;
    for (const auto& [k, v] : rows) {
        t.add_row({k, v});
        summary[k] = num(v);
    }
    summary["regime"] = std::string(to_string(derive_regime(s.preferences).kind));
    return {std::move(t), summary};
}

ExperimentOutput run_comparison(const Scenario& s) {
    const Params p(s.params);
    const auto r = comparison_property(s.preferences, s.market, p.number("dt", 0.05), p.integer("n_steps", 60),
                                       p.integer("pairs", 200), s.seed);
    CsvTable t({"pair", "kappa_sub", "kappa_super"});
    for (std::size_t i = 0; i < r.kappa_sub.size(); ++i) {
        t.add_row({static_cast<long long>(i), r.kappa_sub[i], r.kappa_super[i]});
    }
    json summary{{"pairs", r.pairs}, {"violations", r.violations}, {"projections", r.projections}};
    return {std::move(t), summary};
}

ExperimentOutput counterexample_output(const CounterexampleReport& r) {
    CsvTable t({"horizon", "discounted_partial", "positive_part", "negative_part"});
    for (std::size_t i = 0; i < r.horizons.size(); ++i) {
        t.add_row({r.horizons[i], r.discounted_partials[i], r.positive_part_partials[i], r.negative_part_partials[i]});
    }
    json summary{{"discounted_value_at_0", num(r.discounted_value_at_0)},
                 {"formula_value_at_0", num(r.formula_value_at_0)},
                 {"positive_fit", fit_json(r.positive_fit)},
                 {"negative_fit", fit_json(r.negative_fit)},
                 {"difference_form_diverges", r.difference_form_diverges}};
    return {std::move(t), summary};
}

ExperimentOutput run_crra_counterexample(const Scenario& s) {
    const Params p(s.params);
    const auto r = crra_counterexample(p.number("delta", s.preferences.delta()), p.number("R", s.preferences.R()),
                                       p.numbers("horizons", default_horizons()));
    return counterexample_output(r);
}

ExperimentOutput run_ezsdu_counterexample(const Scenario& s) {
    const Params p(s.params);
    auto out = counterexample_output(ezsdu_counterexample(s.preferences, p.numbers("horizons", default_horizons())));
    out.summary["expected_positive_slope"] = num(ezsdu_positive_slope(s.preferences));
    return out;
}

ExperimentOutput run_generalized(const Scenario& s) {
    const Params p(s.params);
    const int n_max = p.integer("n_max", 8192);
    const std::string consumption = p.text("consumption", "zero", {"zero", "fraction_of_candidate"});
    const double fraction = p.number("fraction", 0.5);
    if (fraction < 0.0) invalid("experiment.params.fraction", "must be nonnegative");
    const auto cand = candidate_policy(s.preferences, s.market);
    const Lattice lat = build_lattice(s.market, cand.strategy(), s.lattice.dt, s.lattice.n_steps, 1.0);
    const double scale = consumption == "zero" ? 0.0 : fraction * cand.eta;
    const AdaptedGrid C(lat.n_steps(), scale * lat.node_wealth());
    const auto r =
        generalized_utility(C, s.preferences, s.market, lat, make_tail(s, cand.strategy()), n_max, make_solver_options(s));
    CsvTable t({"n", "value", "iterations"});
    for (std::size_t i = 0; i < r.n.size(); ++i) {
        t.add_row({static_cast<long long>(r.n[i]), r.values[i], static_cast<long long>(r.iterations[i])});
    }
    json summary{{"classification", to_string(r.classification)},
                 {"limit", num(r.limit)},
                 {"monotone", r.monotone},
                 {"divergence_threshold", kDivergenceThreshold}};
    return {std::move(t), summary};
}

ExperimentOutput run_mc_drift(const Scenario& s) {
    const Params p(s.params);
    const auto cand = candidate_policy(s.preferences, s.market);
    const double nu = p.number("nu", s.preferences.delta() * s.preferences.theta());
    const ProportionalStrategy strat(p.number("pi", cand.pi_hat), p.number("xi", cand.eta));
    const auto d = mc_drift_check(s.market, strat, nu, s.preferences.R(), p.integer("n_paths", 100000),
                                  p.number("horizon", 5.0), s.seed, p.integer("n_times", 50));
    const double expected = -H_nu(nu, s.preferences, s.market, strat);
    CsvTable t({"time", "log_mean"});
    for (Eigen::Index i = 0; i < d.times.size(); ++i) t.add_row({d.times(i), d.log_mean(i)});
    const double z = (d.slope - expected) / d.standard_error;
    json summary{{"slope", num(d.slope)},
                 {"standard_error", num(d.standard_error)},
                 {"expected_slope", num(expected)},
                 {"z_score", num(z)},
                 {"within_three_se", std::abs(z) <= 3.0}};
    return {std::move(t), summary};
}

ExperimentOutput run_picard(const Scenario& s) {
    const Params p(s.params);
    const double x0 = p.number("wealth", 1.0);
    if (!(x0 > 0.0)) invalid("experiment.params.wealth", "must be positive");
    const auto cand = candidate_policy(s.preferences, s.market);
    const Lattice lat = build_lattice(s.market, cand.strategy(), s.lattice.dt, s.lattice.n_steps, x0);
    const AdaptedGrid C(lat.n_steps(), cand.eta * lat.node_wealth());
    const AdaptedGrid U = consumption_to_U(s.preferences, C, lat);
    SolverOptions options = make_solver_options(s);
    if (p.has("initial_scale")) options.initial_scale = p.number("initial_scale", 1.0);
    std::optional<AdaptedGrid> lambda;
    if (options.epsilon > 0.0) lambda = U;
    const auto r = picard_solve(s.preferences, U, lat, make_tail(s, cand.strategy()), options, lambda ? &*lambda : nullptr);
    const AdaptedGrid V = W_to_V(s.preferences, r.solution);
    const auto check = check_solution(V, C, lat, s.preferences);

    CsvTable t({"iteration", "step", "ratio"});
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
        const double ratio = i == 0 ? std::numeric_limits<double>::quiet_NaN() : r.contraction_ratios[i - 1];
        t.add_row({static_cast<long long>(i + 1), r.steps[i], ratio});
    }
    const double closed = cand.value(x0);
    json summary{{"V0", num(V(0, 0))},
                 {"closed_form_value", num(closed)},
                 {"relative_error", num(std::abs(V(0, 0) - closed) / std::abs(closed))},
                 {"iterations", r.iterations},
                 {"converged", r.converged},
                 {"residual", num(r.residual)},
                 {"modulus", num(r.modulus)},
                 {"splitting_depth", r.splitting_depth},
                 {"clamp_count", r.clamp_count},
                 {"classification", to_string(check.classification)},
                 {"min_defect", num(check.min_defect)},
                 {"max_defect", num(check.max_defect)},
                 {"transversality_ok", check.transversality_ok}};
    return {std::move(t), summary};
}

ExperimentOutput run_grid_search(const Scenario& s) {
    const Params p(s.params);
    const auto pis = make_grid(p.number("pi_min", 0.0), p.number("pi_max", 1.5), p.number("pi_step", 0.01));
    const auto xis = make_grid(p.number("xi_min", 0.005), p.number("xi_max", 0.1), p.number("xi_step", 0.0005));
    const auto r = policy_grid_search(s.preferences, s.market, pis, xis);
    CsvTable t({"pi", "xi", "value"});
    for (std::size_t i = 0; i < pis.size(); ++i) {
        for (std::size_t j = 0; j < xis.size(); ++j) {
            t.add_row({pis[i], xis[j], r.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
        }
    }
    const auto cand = candidate_policy(s.preferences, s.market);
    json summary{{"pi", num(r.pi)},
                 {"xi", num(r.xi)},
                 {"max_value", num(r.max_value)},
                 {"masked_cells", r.masked_cells},
                 {"pi_hat", num(cand.pi_hat)},
                 {"eta", num(cand.eta)},
                 {"pi_step", num(p.number("pi_step", 0.01))},
                 {"xi_step", num(p.number("xi_step", 0.0005))}};
    return {std::move(t), summary};
}

ExperimentOutput run_sweep(const Scenario& s) {
    const Params p(s.params);
    const auto xis = p.has("xi_values") ? p.numbers("xi_values", {})
                                        : make_grid(p.number("xi_min", 0.005), p.number("xi_max", 0.2),
                                                    p.number("xi_step", 0.005));
    const double nu = p.number("nu", s.preferences.delta());
    const auto r = transversality_sweep(s.preferences.delta(), s.preferences.R(), s.market, nu, xis);
    CsvTable t({"pi", "xi", "nu", "H_nu", "H_delta", "transversality_ok", "K", "V0", "value_sign", "aggregator_sign",
                "bubble", "evaluable"});
    for (const auto& c : r.cells) {
        t.add_row({c.pi, c.xi, c.nu, c.H_nu_value, c.H_delta_value, c.transversality_ok, c.K, c.V0,
                   static_cast<long long>(c.bubble.value_sign), static_cast<long long>(c.bubble.aggregator_sign),
                   c.bubble.is_bubble, c.evaluable});
    }
    json summary{{"cells", r.cells.size()},
                 {"bubbles", r.bubbles},
                 {"transversality_failures", r.transversality_failures},
                 {"xi_nu_max", num(r.xi_nu_max)},
                 {"eta_additive", num(r.eta_additive)}};
    return {std::move(t), summary};
}

ExperimentOutput run_verification(const Scenario& s) {
    const Params p(s.params);
    VerificationOptions o;
    o.epsilon = p.number("epsilon", o.epsilon);
    o.n_samples = p.integer("n_samples", o.n_samples);
    o.n_strategies = p.integer("n_strategies", o.n_strategies);
    o.dt = p.number("dt", o.dt);
    o.n_steps = p.integer("n_steps", o.n_steps);
    o.tol = p.number("tol", o.tol);
    o.seed = s.seed;
    const auto r = verification_check(s.preferences, s.market, o);
    CsvTable t({"x", "y", "c", "pi", "A1", "A2", "A3"});
    for (const auto& h : r.samples) t.add_row({h.x, h.y, h.c, h.pi, h.A1, h.A2, h.A3});
    json strategies = json::array();
    for (const auto& c : r.strategies) {
        strategies.push_back({{"pi", num(c.pi)},
                              {"xi", num(c.xi)},
                              {"classification", to_string(c.classification)},
                              {"min_defect", num(c.min_defect)},
                              {"max_defect", num(c.max_defect)},
                              {"transversality_ok", c.transversality_ok}});
    }
    const auto& a = r.at_optimum;
    json summary{{"epsilon", num(r.epsilon)},
                 {"max_A1", num(r.max_A1)},
                 {"max_A2", num(r.max_A2)},
                 {"max_abs_A3", num(r.max_abs_A3)},
                 {"at_optimum", {{"A1", num(a.A1)}, {"A2", num(a.A2)}, {"A3", num(a.A3)}}},
                 {"supersolutions", r.supersolutions},
                 {"strategies", strategies}};
    return {std::move(t), summary};
}

ExperimentOutput run_divergence(const Scenario& s) {
    const Params p(s.params);
    const std::vector<double> fallback = s.preferences.R() > 1.0
                                             ? std::vector<double>{1, 10, 100, 1e3, 1e4, 1e5, 1e6}
                                             : std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12};
    const auto r = wellposed_divergence(s.preferences, s.market, p.numbers("schedule", fallback), p.number("wealth", 1.0));
    CsvTable t({"parameter", "value"});
    for (const auto& q : r.probe) t.add_row({q.parameter, q.value});
    json summary{{"risk_averse_above_one", r.risk_averse_above_one},
                 {"eta", num(r.eta)},
                 {"xi_star", num(r.xi_star)},
                 {"strictly_monotone", r.strictly_monotone},
                 {"max_abs_value", num(r.max_abs_value)},
                 {"verdict", to_string(r.verdict)}};
    return {std::move(t), summary};
}

struct Runner {
    CatalogEntry entry;
    ExperimentOutput (*run)(const Scenario&);
};

const std::vector<Runner>& runners() {
    static const std::vector<Runner> table = [] {
        std::vector<Runner> r{
            {{"aversion_demos", "risk and intertemporal aversion of the aggregator",
              "Signs of the risk gap E[V(Y)] - V(E Y) and of the temporal smoothing gap",
              {{"y_low", "low outcome (0.5)"},
               {"y_high", "high outcome (1.5)"},
               {"c_first", "first consumption level (1)"},
               {"c_second", "second consumption level (2)"},
               {"switch_time", "time of the level switch (10)"}}},
             run_aversion},
            {{"candidate_policy", "closed-form optimal policy and value",
              "pi_hat, eta, value coefficient and H_{delta theta} for the scenario",
              {{"wealth", "wealth at which the value is reported (1)"}}},
             run_candidate},
            {{"comparison_property", "ordering of sub- and supersolutions",
              "Randomised sub/supersolution pairs on the lattice checked for ordering",
              {{"pairs", "number of pairs (200)"}, {"dt", "lattice step (0.05)"}, {"n_steps", "lattice steps (60)"}}},
             run_comparison},
            {{"crra_counterexample", "deterministic counterexample, additive utility",
              "Discounted versus difference-form partial integrals on A = union [2n, 2n+1)",
              {{"delta", "discount rate (scenario delta)"},
               {"R", "risk aversion (scenario R)"},
               {"horizons", "truncation horizons (10..100)"}}},
             run_crra_counterexample},
            {{"ezsdu_counterexample", "deterministic counterexample, recursive utility",
              "Discounted versus difference-form partial integrals for the EZ aggregator",
              {{"horizons", "truncation horizons (10..100)"}}},
             run_ezsdu_counterexample},
            {{"generalized_utility", "utility of consumption streams outside the proper class",
              "V^n_0 along the floored or capped approximations C^n",
              {{"n_max", "largest n in 1, 2, 4, ... (8192)"},
               {"consumption", "zero | fraction_of_candidate (zero)"},
               {"fraction", "multiple of eta X for fraction_of_candidate (0.5)"}}},
             run_generalized},
            {{"mc_drift_check", "growth rate of discounted wealth powers",
              "Monte Carlo slope of log E[e^{-nu t} X_t^{1-R}] against -H_nu",
              {{"n_paths", "simulated paths (100000)"},
               {"horizon", "simulation horizon (5)"},
               {"n_times", "regression times (50)"},
               {"nu", "discount rate (delta theta)"},
               {"pi", "risky fraction (pi_hat)"},
               {"xi", "consumption rate (eta)"}}},
             run_mc_drift},
            {{"picard_solve", "fixed point of the utility recursion on a lattice",
              "Log-space Picard iteration for the candidate strategy against the closed form",
              {{"wealth", "initial wealth (1)"}, {"initial_scale", "start from a multiple of U (integrated start)"}}},
             run_picard},
            {{"policy_grid_search", "optimality of the candidate over proportional strategies",
              "Grid maximum of the proportional-strategy value",
              {{"pi_min", "(0)"},
               {"pi_max", "(1.5)"},
               {"pi_step", "(0.01)"},
               {"xi_min", "(0.005)"},
               {"xi_max", "(0.1)"},
               {"xi_step", "(0.0005)"}}},
             run_grid_search},
            {{"transversality_sweep", "transversality and bubbles for additive utility",
              "Cells along xi at pi_hat with transversality and bubble flags",
              {{"nu", "transversality rate (scenario delta)"},
               {"xi_min", "(0.005)"},
               {"xi_max", "(0.2)"},
               {"xi_step", "(0.005)"},
               {"xi_values", "explicit xi list, overrides the range"}}},
             run_sweep},
            {{"verification_check", "HJB verification after a change of numeraire",
              "Signs of the HJB trio on random samples and supersolution checks of random strategies",
              {{"epsilon", "(0.1)"},
               {"n_samples", "(10000)"},
               {"n_strategies", "(20)"},
               {"dt", "(0.02)"},
               {"n_steps", "(50)"},
               {"tol", "(1e-6)"}}},
             run_verification},
            {{"wellposed_divergence", "value divergence when eta <= 0",
              "Probe of proportional values approaching the ill-posed boundary",
              {{"schedule", "xi offsets (R < 1) or indices n (R > 1)"}, {"wealth", "(1)"}}},
             run_divergence},
        };
        std::sort(r.begin(), r.end(), [](const Runner& a, const Runner& b) { return a.entry.name < b.entry.name; });
        return r;
    }();
    return table;
}

const Runner* find_runner(const std::string& name) {
    for (const auto& r : runners()) {
        if (r.entry.name == name) return &r;
    }
    return nullptr;
}

}  // namespace

const std::vector<CatalogEntry>& experiment_catalog() {
    static const std::vector<CatalogEntry> catalog = [] {
        std::vector<CatalogEntry> out;
        for (const auto& r : runners()) out.push_back(r.entry);
        return out;
    }();
    return catalog;
}

json catalog_json() {
    json out = json::array();
    for (const auto& e : experiment_catalog()) {
        json params = json::array();
        for (const auto& p : e.parameters) params.push_back({{"name", p.name}, {"description", p.description}});
        out.push_back({{"name", e.name}, {"anchor", e.anchor}, {"description", e.description}, {"parameters", params}});
    }
    return out;
}

Scenario parse_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::ValidationError, "scenario must be a JSON object");
    reject_unknown(doc, {"schema_version", "id", "preferences", "market", "lattice", "solver", "experiment", "seed"}, "");

    const long long version = read_integer(doc, "schema_version", "schema_version", std::nullopt);
    if (version != kSchemaVersion) invalid("schema_version", "must be " + std::to_string(kSchemaVersion));

    if (!doc.contains("id") || !doc.at("id").is_string()) invalid("id", "must be a string");
    const std::string id = doc.at("id").get<std::string>();
    static const std::regex id_pattern("[A-Za-z0-9_.-]+");
    if (!std::regex_match(id, id_pattern)) invalid("id", "must match [A-Za-z0-9_.-]+");

    const json& pj = require_object(doc, "preferences", "preferences");
    reject_unknown(pj, {"b", "delta", "R", "S"}, "preferences");
    const double b = read_number(pj, "b", "preferences.b", std::nullopt);
    const double delta = read_number(pj, "delta", "preferences.delta", std::nullopt);
    const double R = read_number(pj, "R", "preferences.R", std::nullopt);
    const double S = read_number(pj, "S", "preferences.S", std::nullopt);
    if (!(b > 0.0)) invalid("preferences.b", "must be positive");
    if (!(R > 0.0) || R == 1.0) invalid("preferences.R", "must be positive and different from 1");
    if (!(S > 0.0) || S == 1.0) invalid("preferences.S", "must be positive and different from 1");

    const json& mj = require_object(doc, "market", "market");
    reject_unknown(mj, {"r", "mu", "sigma"}, "market");
    const double r = read_number(mj, "r", "market.r", std::nullopt);
    const double mu = read_number(mj, "mu", "market.mu", std::nullopt);
    const double sigma = read_number(mj, "sigma", "market.sigma", std::nullopt);
    if (!(sigma > 0.0)) invalid("market.sigma", "must be positive");

    LatticeConfig lattice;
    if (doc.contains("lattice")) {
        const json& lj = require_object(doc, "lattice", "lattice");
        reject_unknown(lj, {"dt", "n_steps", "tail"}, "lattice");
        lattice.dt = read_number(lj, "dt", "lattice.dt", lattice.dt);
        const long long n = read_integer(lj, "n_steps", "lattice.n_steps", lattice.n_steps);
        if (!(lattice.dt > 0.0)) invalid("lattice.dt", "must be positive");
        if (n < 1 || n > 100000) invalid("lattice.n_steps", "must be between 1 and 100000");
        lattice.n_steps = static_cast<int>(n);
        if (lj.contains("tail")) {
            const json& t = lj.at("tail");
            if (!t.is_string() || (t != "zero" && t != "proportional")) {
                invalid("lattice.tail", "must be \"zero\" or \"proportional\"");
            }
            lattice.tail = t.get<std::string>();
        }
    }

    SolverConfig solver;
    if (doc.contains("solver")) {
        const json& sj = require_object(doc, "solver", "solver");
        reject_unknown(sj, {"epsilon", "tol", "max_iter"}, "solver");
        solver.epsilon = read_number(sj, "epsilon", "solver.epsilon", solver.epsilon);
        solver.tol = read_number(sj, "tol", "solver.tol", solver.tol);
        const long long it = read_integer(sj, "max_iter", "solver.max_iter", solver.max_iter);
        if (solver.epsilon < 0.0) invalid("solver.epsilon", "must be nonnegative");
        if (!(solver.tol > 0.0)) invalid("solver.tol", "must be positive");
        if (it < 1 || it > 1000000) invalid("solver.max_iter", "must be between 1 and 1000000");
        solver.max_iter = static_cast<int>(it);
    }

    const json& ej = require_object(doc, "experiment", "experiment");
    reject_unknown(ej, {"name", "params"}, "experiment");
    if (!ej.contains("name") || !ej.at("name").is_string()) invalid("experiment.name", "must be a string");
    const std::string name = ej.at("name").get<std::string>();
    const Runner* runner = find_runner(name);
    if (!runner) invalid("experiment.name", "is not in the catalog: " + name);
    json params = json::object();
    if (ej.contains("params")) {
        params = ej.at("params");
        if (!params.is_object()) invalid("experiment.params", "must be an object");
        std::set<std::string> allowed;
        for (const auto& p : runner->entry.parameters) allowed.insert(p.name);
        reject_unknown(params, allowed, "experiment.params");
    }

    std::uint64_t seed = 0;
    if (doc.contains("seed")) {
        const json& sv = doc.at("seed");
        if (!sv.is_number_unsigned() && !(sv.is_number_integer() && sv.get<long long>() >= 0)) {
            invalid("seed", "must be a nonnegative integer");
        }
        seed = sv.get<std::uint64_t>();
    }

    return Scenario{id, Preferences(b, delta, R, S), Market(r, mu, sigma), lattice, solver, name, params, seed};
}

Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_text_file(path)); }

json to_json(const Scenario& s) {
    return {{"schema_version", kSchemaVersion},
            {"id", s.id},
            {"preferences", {{"b", s.preferences.b()}, {"delta", s.preferences.delta()}, {"R", s.preferences.R()}, {"S", s.preferences.S()}}},
            {"market", {{"r", s.market.r()}, {"mu", s.market.mu()}, {"sigma", s.market.sigma()}}},
            {"lattice", {{"dt", s.lattice.dt}, {"n_steps", s.lattice.n_steps}, {"tail", s.lattice.tail}}},
            {"solver", {{"epsilon", s.solver.epsilon}, {"tol", s.solver.tol}, {"max_iter", s.solver.max_iter}}},
            {"experiment", {{"name", s.experiment}, {"params", s.params}}},
            {"seed", s.seed}};
}

std::string input_hash(const Scenario& s) { return sha256_hex(to_json(s).dump()); }

ExperimentOutput execute(const Scenario& s) {
    const Runner* runner = find_runner(s.experiment);
    if (!runner) throw Error(ErrorCode::ValidationError, "experiment.name is not in the catalog: " + s.experiment);
    ExperimentOutput out = runner->run(s);
    out.summary["experiment"] = s.experiment;
    out.summary["scenario_id"] = s.id;
    out.summary["input_hash"] = input_hash(s);
    out.summary["artifact_version"] = kArtifactVersion;
    out.summary["seed"] = s.seed;
    return out;
}

json to_json(const RunManifest& m) {
    return {{"scenario_id", m.scenario_id},
            {"artifact_version", m.artifact_version},
            {"input_hash", m.input_hash},
            {"outputs", m.outputs},
            {"wall_clock_seconds", m.wall_clock_seconds}};
}

RunManifest run_scenario(const Scenario& s, const std::filesystem::path& out_dir) {
    const auto start = std::chrono::steady_clock::now();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

    const ExperimentOutput out = execute(s);
    const std::string stem = s.experiment + "_" + s.id;
    write_text_file(out_dir / (stem + ".csv"), out.table.str());
    write_text_file(out_dir / (stem + ".json"), out.summary.dump(2) + "\n");

    RunManifest manifest{s.id, kArtifactVersion, input_hash(s), {stem + ".csv", stem + ".json"}, 0.0};
    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text_file(out_dir / (stem + ".manifest.json"), to_json(manifest).dump(2) + "\n");
    return manifest;
}

json error_json(const std::string& code, const std::string& message, int exit_status) {
    return {{"error", {{"code", code}, {"message", message}, {"exit_code", exit_status}}}};
}

}  // namespace ezsdu
