// JSON experiment configuration. Unknown keys are rejected at every level;
// `resolved` echoes the configuration with every default filled in.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mctl/dynamics.hpp"
#include "mctl/error.hpp"
#include "mctl/field.hpp"
#include "mctl/field_io.hpp"
#include "mctl/nonlinearity.hpp"
#include "mctl/schedule.hpp"
#include "mctl/synthesis.hpp"

namespace mctl {

using nlohmann::json;

namespace detail {

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

template <class T>
T get_required(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    return get_or<T>(j, key, T{}, where);
}

}  // namespace detail

// Builtin fields ---------------------------------------------------------------

/// Declarative field: a builtin profile or a CSV file on the grid.
///   {"builtin": "eigenmode", "k": [1, 1], "amplitude": 1}
///   {"builtin": "product_bump", "amplitude": 1, "cos_mode": 0}
///       amplitude * prod_a x_a (l_a - x_a) (1 + cos(cos_mode pi x_a / l_a))^[cos_mode > 0]
///   {"builtin": "raised_cosine", "amplitude": 1, "center": [0.5], "radius": 0.25}
///   {"builtin": "sine_mix", "coefficients": [1, 0.1, ...]}   (1D: sum c_k sin(k pi x / l))
///   {"builtin": "constant", "value": 0}
///   {"csv": "path/relative/to/config.csv"}
struct FieldSpec {
    json raw;
};

inline ScalarField eigenmode_field(const Grid& g, std::array<int, 2> k, double amplitude) {
    return ScalarField::sample(g, [&](double x, double y) {
        double s = amplitude * std::sin(k[0] * std::numbers::pi * x / g.length(0));
        if (g.dim() == 2) s *= std::sin(k[1] * std::numbers::pi * y / g.length(1));
        return s;
    });
}

inline ScalarField product_bump_field(const Grid& g, double amplitude, int cos_mode) {
    auto axis = [&](double x, int a) {
        const double l = g.length(a);
        double b = x * (l - x);
        if (cos_mode > 0) b *= 1.0 + std::cos(cos_mode * std::numbers::pi * x / l);
        return b;
    };
    return ScalarField::sample(g, [&](double x, double y) {
        double s = amplitude * axis(x, 0);
        if (g.dim() == 2) s *= axis(y, 1);
        return s;
    });
}

inline ScalarField raised_cosine_field(const Grid& g, double amplitude, std::array<double, 2> center, double radius) {
    if (!(radius > 0.0)) throw ConfigError("raised_cosine: radius must be positive");
    return ScalarField::sample(g, [&](double x, double y) {
        double r2 = (x - center[0]) * (x - center[0]);
        if (g.dim() == 2) r2 += (y - center[1]) * (y - center[1]);
        const double r = std::sqrt(r2) / radius;
        return r < 1.0 ? 0.5 * amplitude * (1.0 + std::cos(std::numbers::pi * r)) : 0.0;
    });
}

inline ScalarField sine_mix_field(const Grid& g, const std::vector<double>& c) {
    if (g.dim() != 1) throw ConfigError("sine_mix: 1D grids only");
    ScalarField out(g);
    for (std::size_t k = 0; k < c.size(); ++k) out += c[k] * eigenmode_field(g, {static_cast<int>(k) + 1, 1}, 1.0);
    return out;
}

inline ScalarField build_field(const FieldSpec& spec, const Grid& g, const std::filesystem::path& base_dir,
                               const std::string& where) {
    const json& j = spec.raw;
    if (j.contains("csv")) {
        detail::check_keys(j, {"csv"}, where);
        std::filesystem::path p = detail::get_required<std::string>(j, "csv", where);
        if (p.is_relative()) p = base_dir / p;
        ScalarField u = read_field_csv(p.string());
        if (!(u.grid() == g)) throw ConfigError(where + ": CSV field " + p.string() + " does not match the grid");
        return u;
    }
    const auto kind = detail::get_required<std::string>(j, "builtin", where);
    if (kind == "eigenmode") {
        detail::check_keys(j, {"builtin", "k", "amplitude"}, where);
        std::vector<int> k = detail::get_or<std::vector<int>>(j, "k", {1, 1}, where);
        if (k.empty() || k.size() > 2 || k[0] < 1 || (k.size() == 2 && k[1] < 1))
            throw ConfigError(where + ": eigenmode k must hold one or two indices >= 1");
        return eigenmode_field(g, {k[0], k.size() > 1 ? k[1] : 1}, detail::get_or(j, "amplitude", 1.0, where));
    }
    if (kind == "product_bump") {
        detail::check_keys(j, {"builtin", "amplitude", "cos_mode"}, where);
        const int m = detail::get_or(j, "cos_mode", 0, where);
        if (m < 0) throw ConfigError(where + ": cos_mode must be >= 0");
        return product_bump_field(g, detail::get_or(j, "amplitude", 1.0, where), m);
    }
    if (kind == "raised_cosine") {
        detail::check_keys(j, {"builtin", "amplitude", "center", "radius"}, where);
        std::vector<double> c = detail::get_or<std::vector<double>>(
            j, "center", {0.5 * g.length(0), g.dim() == 2 ? 0.5 * g.length(1) : 0.0}, where);
        if (c.size() < static_cast<std::size_t>(g.dim())) throw ConfigError(where + ": center needs dim entries");
        return raised_cosine_field(g, detail::get_or(j, "amplitude", 1.0, where), {c[0], c.size() > 1 ? c[1] : 0.0},
                                   detail::get_or(j, "radius", 0.25 * g.min_length(), where));
    }
    if (kind == "sine_mix") {
        detail::check_keys(j, {"builtin", "coefficients"}, where);
        return sine_mix_field(g, detail::get_required<std::vector<double>>(j, "coefficients", where));
    }
    if (kind == "constant") {
        detail::check_keys(j, {"builtin", "value"}, where);
        return ScalarField(g, detail::get_or(j, "value", 0.0, where));
    }
    throw ConfigError(where + ": unknown builtin '" + kind + "'");
}

// Experiment configuration -------------------------------------------------------

/// control.kind:
///   "constant"    {"value": v}
///   "field"       {"field": FieldSpec}
///   "piecewise"   {"breakpoints": [0, t1, ..., T], "steps": [FieldSpec, ...]}
///   "thm14"       static ln(u*/u0)/T (needs a target)
///   "synthesized" produced by the synthesize subcommand
struct ControlSpec {
    std::string kind = "constant";
    double value = 0.0;
    std::optional<FieldSpec> field;
    std::vector<double> breakpoints;
    std::vector<FieldSpec> steps;
};

struct ExperimentConfig {
    int dim = 1;
    int n = 99;
    std::array<double, 2> lengths{1.0, 1.0};
    std::string f_kind = "zero";
    double lipschitz = 0.0;
    std::optional<double> coefficient;
    std::optional<FieldSpec> initial;
    std::optional<FieldSpec> initial_b;
    std::optional<FieldSpec> target;
    ControlSpec control;
    double dt = 1e-4;
    double horizon = 0.1;
    std::optional<double> eps;
    std::uint64_t seed = 0;
    std::string output;
    std::vector<double> snapshots;
    bool diffusion = true;
    LinearSolver solver = LinearSolver::conjugate_gradient;

    int suite_cases = 0;
    double fabricate_scale = 1.0;
    double tolerance = 1e-3;

    std::string sweep_parameter;
    std::vector<double> sweep_values;
    std::string sweep_metric = "target_error";

    double oracle_tolerance = 5e-3;

    std::filesystem::path base_dir;
    json resolved;

    [[nodiscard]] Grid grid() const {
        return make_grid(dim, n, std::span<const double>(lengths.data(), static_cast<std::size_t>(dim)));
    }

    [[nodiscard]] Nonlinearity nonlinearity() const {
        if (f_kind == "zero") return Nonlinearity::zero();
        if (f_kind == "linear") return coefficient ? Nonlinearity::linear(*coefficient, lipschitz)
                                                    : Nonlinearity::linear(lipschitz);
        if (f_kind == "scaled_sine") return Nonlinearity::scaled_sine(lipschitz);
        if (f_kind == "saturating") return Nonlinearity::saturating(lipschitz);
        throw ConfigError("nonlinearity: unknown kind '" + f_kind + "'");
    }

    [[nodiscard]] SolveOptions solve_options() const {
        SolveOptions o;
        o.diffusion = diffusion;
        o.solver = solver;
        return o;
    }

    [[nodiscard]] ScalarField field(const std::optional<FieldSpec>& spec, const char* name) const {
        if (!spec) throw ConfigError(std::string("config: '") + name + "' field is required here");
        return build_field(*spec, grid(), base_dir, name);
    }
    [[nodiscard]] ScalarField initial_field() const { return field(initial, "initial"); }
    [[nodiscard]] ScalarField target_field() const { return field(target, "target"); }

    [[nodiscard]] ProblemSpec problem() const { return {grid(), nonlinearity(), initial_field(), horizon}; }

    /// Explicit schedule from the control spec; "thm14" needs initial and target.
    [[nodiscard]] ControlSchedule schedule() const;
};

namespace detail {

inline FieldSpec field_spec(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": field spec must be an object");
    if (!j.contains("csv") && !j.contains("builtin")) throw ConfigError(where + ": needs 'builtin' or 'csv'");
    return {j};
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir = ".") {
    using detail::get_or;
    detail::check_keys(j,
                       {"grid", "nonlinearity", "initial", "initial_b", "target", "control", "dt", "T", "eps",
                        "seed", "output", "snapshots", "diffusion", "solver", "verify", "sweep", "oracle"},
                       "config");
    ExperimentConfig c;
    c.base_dir = base_dir;

    const json grid = j.value("grid", json::object());
    detail::check_keys(grid, {"dim", "n", "lengths"}, "grid");
    c.dim = get_or(grid, "dim", 1, "grid");
    c.n = get_or(grid, "n", 99, "grid");
    std::vector<double> lengths = get_or<std::vector<double>>(grid, "lengths", {1.0, 1.0}, "grid");
    if (lengths.empty()) throw ConfigError("grid.lengths: needs at least one entry");
    c.lengths = {lengths[0], lengths.size() > 1 ? lengths[1] : lengths[0]};
    (void)c.grid();

    const json nl = j.value("nonlinearity", json::object());
    detail::check_keys(nl, {"kind", "L", "c"}, "nonlinearity");
    c.f_kind = get_or<std::string>(nl, "kind", "zero", "nonlinearity");
    c.lipschitz = get_or(nl, "L", 0.0, "nonlinearity");
    if (nl.contains("c")) c.coefficient = get_or(nl, "c", 0.0, "nonlinearity");
    (void)c.nonlinearity();

    if (j.contains("initial")) c.initial = detail::field_spec(j["initial"], "initial");
    if (j.contains("initial_b")) c.initial_b = detail::field_spec(j["initial_b"], "initial_b");
    if (j.contains("target")) c.target = detail::field_spec(j["target"], "target");

    const json ctl = j.value("control", json{{"kind", "constant"}});
    detail::check_keys(ctl, {"kind", "value", "field", "breakpoints", "steps"}, "control");
    c.control.kind = get_or<std::string>(ctl, "kind", "constant", "control");
    c.control.value = get_or(ctl, "value", 0.0, "control");
    if (ctl.contains("field")) c.control.field = detail::field_spec(ctl["field"], "control.field");
    c.control.breakpoints = get_or<std::vector<double>>(ctl, "breakpoints", {}, "control");
    if (ctl.contains("steps")) {
        if (!ctl["steps"].is_array()) throw ConfigError("control.steps: expected an array");
        for (const auto& s : ctl["steps"]) c.control.steps.push_back(detail::field_spec(s, "control.steps"));
    }
    const std::string& kind = c.control.kind;
    if (kind != "constant" && kind != "field" && kind != "piecewise" && kind != "thm14" && kind != "synthesized")
        throw ConfigError("control.kind: unknown kind '" + kind + "'");
    if (kind == "field" && !c.control.field) throw ConfigError("control: kind 'field' needs 'field'");
    if (kind == "piecewise" && c.control.breakpoints.size() != c.control.steps.size() + 1)
        throw ConfigError("control: piecewise needs one more breakpoint than steps");

    c.dt = get_or(j, "dt", 1e-4, "config");
    c.horizon = get_or(j, "T", 0.1, "config");
    if (!(c.dt > 0.0)) throw ConfigError("config.dt: must be positive");
    if (!(c.horizon > 0.0)) throw ConfigError("config.T: must be positive");
    if (j.contains("eps")) c.eps = get_or(j, "eps", 0.0, "config");
    c.seed = get_or<std::uint64_t>(j, "seed", 0, "config");
    c.output = get_or<std::string>(j, "output", "", "config");
    c.snapshots = get_or<std::vector<double>>(j, "snapshots", {}, "config");
    c.diffusion = get_or(j, "diffusion", true, "config");
    const auto solver = get_or<std::string>(j, "solver", "cg", "config");
    if (solver == "direct") c.solver = LinearSolver::direct;
    else if (solver == "cg") c.solver = LinearSolver::conjugate_gradient;
    else throw ConfigError("config.solver: expected 'direct' or 'cg'");

    const json ver = j.value("verify", json::object());
    detail::check_keys(ver, {"suite_cases", "fabricate_scale", "tolerance"}, "verify");
    c.suite_cases = get_or(ver, "suite_cases", 0, "verify");
    c.fabricate_scale = get_or(ver, "fabricate_scale", 1.0, "verify");
    c.tolerance = get_or(ver, "tolerance", 1e-3, "verify");

    const json sw = j.value("sweep", json::object());
    detail::check_keys(sw, {"parameter", "values", "metric"}, "sweep");
    c.sweep_parameter = get_or<std::string>(sw, "parameter", "", "sweep");
    c.sweep_values = get_or<std::vector<double>>(sw, "values", {}, "sweep");
    c.sweep_metric = get_or<std::string>(sw, "metric", "target_error", "sweep");
    if (c.sweep_metric != "target_error" && c.sweep_metric != "oracle_error")
        throw ConfigError("sweep.metric: expected 'target_error' or 'oracle_error'");

    const json orc = j.value("oracle", json::object());
    detail::check_keys(orc, {"tolerance"}, "oracle");
    c.oracle_tolerance = get_or(orc, "tolerance", 5e-3, "oracle");

    json r;
    r["grid"] = {{"dim", c.dim}, {"n", c.n}, {"lengths", std::vector<double>(lengths.begin(), lengths.begin() + c.dim)}};
    r["nonlinearity"] = {{"kind", c.f_kind}, {"L", c.lipschitz}};
    if (c.coefficient) r["nonlinearity"]["c"] = *c.coefficient;
    if (c.initial) r["initial"] = c.initial->raw;
    if (c.initial_b) r["initial_b"] = c.initial_b->raw;
    if (c.target) r["target"] = c.target->raw;
    r["control"] = ctl;
    r["control"]["kind"] = c.control.kind;
    r["dt"] = c.dt;
    r["T"] = c.horizon;
    if (c.eps) r["eps"] = *c.eps;
    r["seed"] = c.seed;
    r["output"] = c.output;
    r["snapshots"] = c.snapshots;
    r["diffusion"] = c.diffusion;
    r["solver"] = solver;
    r["verify"] = {{"suite_cases", c.suite_cases}, {"fabricate_scale", c.fabricate_scale}, {"tolerance", c.tolerance}};
    r["sweep"] = {{"parameter", c.sweep_parameter}, {"values", c.sweep_values}, {"metric", c.sweep_metric}};
    r["oracle"] = {{"tolerance", c.oracle_tolerance}};
    c.resolved = std::move(r);
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path());
}

inline ControlSchedule ExperimentConfig::schedule() const {
    const Grid g = grid();
    const std::string& k = control.kind;
    if (k == "constant") return ControlSchedule::constant(g, control.value, horizon);
    if (k == "field") return ControlSchedule::constant(build_field(*control.field, g, base_dir, "control.field"), horizon);
    if (k == "piecewise") {
        std::vector<ScalarField> steps;
        for (const auto& s : control.steps) steps.push_back(build_field(s, g, base_dir, "control.steps"));
        ControlSchedule sched(control.breakpoints, std::move(steps));
        if (std::abs(sched.horizon() - horizon) > 1e-12 * horizon)
            throw ConfigError("control: last breakpoint differs from T");
        return sched;
    }
    if (k == "thm14")
        return ControlSchedule::constant(synthesis::static_control_thm14(initial_field(), target_field(), horizon),
                                         horizon);
    throw ConfigError("control: kind '" + k + "' has no explicit schedule; run synthesize");
}

}  // namespace mctl
