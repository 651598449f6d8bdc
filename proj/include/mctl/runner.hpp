// Experiment subcommands behind the mctl command line. Every run writes
// manifest.json (the resolved configuration) next to its outputs. Wall-clock
// timings go to a separate timings file so the data files stay reproducible.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mctl/config.hpp"
#include "mctl/dynamics.hpp"
#include "mctl/error.hpp"
#include "mctl/estimates.hpp"
#include "mctl/field_io.hpp"
#include "mctl/report_json.hpp"
#include "mctl/spectral.hpp"
#include "mctl/synthesis.hpp"

namespace mctl::runner {

enum ExitCode : int { kOk = 0, kVerificationFailed = 1, kConfigError = 2, kPreconditionFailed = 3 };

namespace fs = std::filesystem;

inline void write_manifest(const fs::path& out, const std::string& command, const ExperimentConfig& cfg) {
    write_json(out / "manifest.json", {{"command", command}, {"config", cfg.resolved}});
}

inline void write_field(const fs::path& path, const ScalarField& u) {
    std::ostringstream os;
    write_field_csv(os, u);
    write_text_atomic(path, os.str());
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void write_timings(const fs::path& out, const nlohmann::json& j) { write_json(out / "timings.json", j); }

inline std::optional<std::size_t> time_index(const SolveTrace& tr, double t) {
    for (std::size_t j = 0; j < tr.times.size(); ++j)
        if (std::abs(tr.times[j] - t) <= 1e-9 * std::max(1.0, t)) return j;
    return std::nullopt;
}

}  // namespace detail

// simulate -------------------------------------------------------------------------

inline int run_simulate(const ExperimentConfig& cfg, const fs::path& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const ProblemSpec problem = cfg.problem();
    const ControlSchedule schedule = cfg.schedule();
    SolveOptions opts = cfg.solve_options();
    opts.keep_states = !cfg.snapshots.empty();
    const SolveTrace trace = solve(problem, schedule, cfg.dt, opts);

    std::ostringstream csv;
    write_trace_csv(csv, trace);
    write_text_atomic(out / "trace.csv", csv.str());
    write_field(out / "final_state.csv", trace.final_state());

    nlohmann::json snaps = nlohmann::json::array();
    for (std::size_t s = 0; s < cfg.snapshots.size(); ++s) {
        const auto j = detail::time_index(trace, cfg.snapshots[s]);
        if (!j) throw ConfigError("snapshot time " + format_double(cfg.snapshots[s]) + " is not on the time grid");
        const std::string name = "snapshot_" + std::to_string(s) + ".csv";
        write_field(out / name, trace.state(*j));
        snaps.push_back({{"t", trace.times[*j]}, {"file", name}});
    }

    double min_state = std::numeric_limits<double>::infinity();
    for (const auto& r : trace.records) min_state = std::min(min_state, r.min_u);
    nlohmann::json rep = {{"steps", trace.steps()},
                          {"dt", cfg.dt},
                          {"T", cfg.horizon},
                          {"initial_l2", l2_norm(problem.u0)},
                          {"final_l2", trace.records.back().l2_u},
                          {"final_linf", trace.records.back().linf_u},
                          {"min_state", min_state},
                          {"schedule_steps", schedule.size()},
                          {"snapshots", snaps}};
    if (cfg.target) rep["final_error"] = l2_distance(trace.final_state(), cfg.target_field());
    write_json(out / "report.json", rep);
    detail::write_timings(out, {{"runtime_seconds", detail::seconds_since(t0)}});
    return kOk;
}

// synthesize -----------------------------------------------------------------------

struct SynthesisOutcome {
    std::string mode;  // "static" or "two_phase"
    ControlSchedule schedule;
    std::vector<double> step_dt;
    double final_error = 0.0;
    bool success = false;
    std::optional<synthesis::SynthesisReport> report;
};

/// Static ln(u*/u0)/T when the ratio condition holds and already meets eps;
/// otherwise the full steering pipeline.
inline SynthesisOutcome synthesize(const ExperimentConfig& cfg) {
    if (!cfg.eps) throw ConfigError("synthesize: config needs eps");
    const double eps = *cfg.eps;
    const ProblemSpec problem = cfg.problem();
    const ScalarField ustar = cfg.target_field();
    synthesis::detail::require_steerable(problem, ustar, eps);

    std::optional<synthesis::RatioCheck> rc;
    try {
        rc = synthesis::check_ratio_condition(problem.u0, ustar);
    } catch (const PreconditionError&) {
    }
    if (rc && rc->ok) {
        const ScalarField v = synthesis::static_control_thm14(problem.u0, ustar, cfg.horizon);
        ControlSchedule sched = ControlSchedule::constant(v, cfg.horizon);
        const double dt = synthesis::fitted_dt(cfg.horizon, cfg.dt);
        SolveOptions opts = cfg.solve_options();
        opts.keep_states = false;
        const double err = l2_distance(solve(problem, sched, dt, opts).final_state(), ustar);
        if (err < eps) return {"static", std::move(sched), {dt}, err, true, std::nullopt};
    }
    synthesis::SteerOptions so;
    so.dt_max = cfg.dt;
    synthesis::SteerResult r = synthesis::steer(problem, ustar, eps, so);
    SynthesisOutcome o{"two_phase", r.schedule, r.report.step_dt, r.report.final_error, r.report.success, r.report};
    return o;
}

inline int run_synthesize(const ExperimentConfig& cfg, const fs::path& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const SynthesisOutcome o = synthesize(cfg);
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t k = 0; k < o.schedule.size(); ++k) {
        const std::string name = "control_step_" + std::to_string(k) + ".csv";
        write_field(out / name, o.schedule.step(k));
        files.push_back(name);
    }
    write_json(out / "schedule.json",
               {{"breakpoints", o.schedule.breakpoints()}, {"step_dt", o.step_dt}, {"steps", files}});
    nlohmann::json rep = {{"mode", o.mode},
                          {"eps", *cfg.eps},
                          {"final_error", o.final_error},
                          {"success", o.success},
                          {"schedule_steps", o.schedule.size()}};
    if (o.report) {
        rep["synthesis"] = *o.report;
        write_field(out / "final_state.csv", o.report->final_state);
        write_field(out / "target_eta.csv", o.report->plan.u_eta_star);
    }
    write_json(out / "synthesis_report.json", rep);
    detail::write_timings(out, {{"runtime_seconds", detail::seconds_since(t0)}});
    return o.success ? kOk : kVerificationFailed;
}

// verify ---------------------------------------------------------------------------

/// One case of the randomized estimate suite.
struct SuiteCase {
    std::string name;
    ProblemSpec problem;
    ScalarField u0_b;
    ScalarField v;
    double dt = 0.0;
};

/// Nonnegative 5-mode sine mix: sin(pi x) plus higher modes whose weighted
/// sum sum_k k |a_k| stays below 1, which keeps the mix >= 0.
inline ScalarField random_sine_mix(const Grid& g, std::mt19937_64& rng, double amplitude) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> c{amplitude};
    for (int k = 2; k <= 5; ++k) c.push_back(amplitude * 0.2 * u(rng) / (k * k));
    return sine_mix_field(g, c);
}

/// Smooth v <= 0 with ||v||_inf <= 5: -a (1 + sum_k b_k cos(k pi x)) / 2 with |b_k| <= 1/3.
inline ScalarField random_nonpositive_control(const Grid& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0 / 3.0, 1.0 / 3.0), amp(0.0, 5.0);
    const double a = amp(rng);
    double b[3];
    for (double& bk : b) bk = u(rng);
    return ScalarField::sample(g, [&](double x) {
        double s = 1.0;
        for (int k = 1; k <= 3; ++k) s += b[k - 1] * std::cos(k * std::numbers::pi * x / g.length(0));
        return std::min(0.0, -0.5 * a * s);
    });
}

inline constexpr long kSuiteSteps = 1000;

inline std::vector<SuiteCase> make_suite(std::uint64_t seed, int cases, int n = 99) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Grid g = make_grid(1, n, {1.0});
    std::vector<SuiteCase> out;
    for (int i = 0; i < cases; ++i) {
        const int kind = static_cast<int>(rng() % 4);
        const double lip = 0.05 + 0.95 * unit(rng);
        Nonlinearity f;
        switch (kind) {
            case 0: f = Nonlinearity::zero(); break;
            case 1: f = Nonlinearity::linear(lip * (2.0 * unit(rng) - 1.0), lip); break;
            case 2: f = Nonlinearity::scaled_sine(lip); break;
            default: f = Nonlinearity::saturating(lip); break;
        }
        const double horizon = f.lipschitz() > 0.0 ? 1.0 / (8.0 * f.lipschitz()) : 0.1;
        ScalarField v = random_nonpositive_control(g, rng);
        ScalarField u0 = random_sine_mix(g, rng, 0.5 + unit(rng));
        ScalarField u0_b = random_sine_mix(g, rng, 0.5 + unit(rng));
        out.push_back({"case_" + std::to_string(i) + "_" + std::string(f.name()),
                       {g, f, std::move(u0), horizon},
                       std::move(u0_b),
                       std::move(v),
                       horizon / static_cast<double>(kSuiteSteps)});
    }
    return out;
}

/// Multiplies every stored state and norm after t = 0 by `scale`: a trace the
/// estimates must reject when scale is large.
inline SolveTrace fabricate(SolveTrace tr, double scale) {
    for (std::size_t j = 1; j < tr.states.size(); ++j) tr.states[j] *= scale;
    for (std::size_t j = 1; j < tr.records.size(); ++j) {
        auto& r = tr.records[j];
        r.l2_u *= scale;
        r.linf_u *= scale;
        r.l2_f_u *= scale;
        r.l2_lap_u *= scale;
        r.min_u *= scale;
    }
    return tr;
}

inline std::vector<estimates::BoundReport> verify_case(const ProblemSpec& problem, const ControlSchedule& schedule,
                                                       double dt, const std::optional<ScalarField>& u0_b,
                                                       double tol, double fabricate_scale = 1.0,
                                                       const SolveOptions& base = {}) {
    SolveOptions opts = base;
    opts.keep_states = u0_b.has_value();
    SolveTrace tr = solve(problem, schedule, dt, opts);
    if (fabricate_scale != 1.0) tr = fabricate(std::move(tr), fabricate_scale);
    const double lip = problem.f.lipschitz();
    std::vector<estimates::BoundReport> reps;
    if (schedule.size() == 1) {
        for (auto& r : estimates::verify_prop21(tr, lip, schedule.step(0), problem.horizon, tol)) reps.push_back(r);
    }
    reps.push_back(estimates::verify_prop22(tr, lip, schedule, tol));
    if (u0_b) {
        const SolveTrace tb = solve({problem.grid, problem.f, *u0_b, problem.horizon}, schedule, dt, opts);
        reps.push_back(estimates::verify_contraction(tr, tb, lip, schedule, tol));
    }
    reps.push_back(estimates::verify_nonneg(tr));
    return reps;
}

inline std::vector<estimates::BoundReport> verify_suite_case(const SuiteCase& c, double tol,
                                                             double fabricate_scale = 1.0) {
    return verify_case(c.problem, ControlSchedule::constant(c.v, c.problem.horizon), c.dt, c.u0_b, tol,
                       fabricate_scale);
}

/// A run passes when every report whose hypotheses hold passes.
inline bool applicable_pass(const std::vector<estimates::BoundReport>& reps) {
    for (const auto& r : reps)
        if (r.hypothesis_ok && !r.pass) return false;
    return true;
}

inline int run_verify(const ExperimentConfig& cfg, const fs::path& out) {
    const auto t0 = std::chrono::steady_clock::now();
    nlohmann::json cases = nlohmann::json::array();
    bool all = true;
    auto record = [&](const std::string& name, const std::vector<estimates::BoundReport>& reps) {
        const bool ok = applicable_pass(reps);
        all = all && ok;
        cases.push_back({{"name", name}, {"reports", reps}, {"pass", ok}});
    };
    if (cfg.suite_cases > 0) {
        for (const SuiteCase& c : make_suite(cfg.seed, cfg.suite_cases, cfg.n))
            record(c.name, verify_suite_case(c, cfg.tolerance, cfg.fabricate_scale));
    } else {
        std::optional<ScalarField> b;
        if (cfg.initial_b) b = cfg.field(cfg.initial_b, "initial_b");
        record("config", verify_case(cfg.problem(), cfg.schedule(), cfg.dt, b, cfg.tolerance, cfg.fabricate_scale,
                                     cfg.solve_options()));
    }
    write_json(out / "bounds.json", {{"cases", cases}, {"all_pass", all}});
    detail::write_timings(out, {{"runtime_seconds", detail::seconds_since(t0)}});
    return all ? kOk : kVerificationFailed;
}

// oracle-compare -------------------------------------------------------------------

struct OracleComparison {
    double discrepancy = 0.0;
    double v = 0.0;
    spectral::ModalCoeffs before;
    spectral::ModalCoeffs fd_after;
    spectral::ModalCoeffs spectral_after;
    double f_term_norm = 0.0;
    std::optional<double> f_term_bound;
};

/// FD solve against the sine-basis solution with all n modes; with f != 0 the
/// oracle adds the Duhamel reaction term evaluated on the FD states.
inline OracleComparison oracle_compare(const ProblemSpec& problem, const ControlSchedule& schedule, double dt,
                                       const SolveOptions& base = {}) {
    const Grid& g = problem.grid;
    if (g.dim() != 1) throw ConfigError("oracle-compare: 1D grids only");
    if (schedule.size() != 1) throw ConfigError("oracle-compare: needs a single static control");
    const ScalarField& vf = schedule.step(0);
    if (vf.max() - vf.min() > 1e-14 * std::max(1.0, linf_norm(vf)))
        throw ConfigError("oracle-compare: control must be constant in space");
    OracleComparison out;
    out.v = vf[0];
    SolveOptions opts = base;
    opts.keep_states = !problem.f.is_zero();
    const SolveTrace tr = solve(problem, schedule, dt, opts);
    const int order = g.n();
    out.before = spectral::project(problem.u0, order);
    out.spectral_after = spectral::evolve_const_v(out.before, out.v, problem.horizon);
    ScalarField predicted = spectral::reconstruct(out.spectral_after, g);
    if (!problem.f.is_zero()) {
        const ScalarField ft = spectral::f_term(tr, out.v, problem.horizon, order);
        out.f_term_norm = l2_norm(ft);
        predicted += ft;
        out.spectral_after = spectral::project(predicted, order);
        if (out.v >= 0.0) {
            const double m = std::exp(out.v * problem.horizon);
            out.f_term_bound = spectral::f_term_bound(tr, m, problem.horizon, out.v);
        }
    }
    out.fd_after = spectral::project(tr.final_state(), order);
    out.discrepancy = l2_distance(tr.final_state(), predicted);
    return out;
}

inline constexpr std::size_t kModalTableRows = 16;

inline int run_oracle_compare(const ExperimentConfig& cfg, const fs::path& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const OracleComparison c = oracle_compare(cfg.problem(), cfg.schedule(), cfg.dt, cfg.solve_options());
    nlohmann::json table = nlohmann::json::array();
    for (std::size_t k = 1; k <= std::min(kModalTableRows, c.before.order()); ++k) {
        table.push_back({{"k", k},
                         {"lambda_k", spectral::eigenvalue(static_cast<int>(k), c.before.length)},
                         {"c_before", c.before.c[k - 1]},
                         {"c_after_fd", c.fd_after.c[k - 1]},
                         {"c_after_spectral", c.spectral_after.c[k - 1]}});
    }
    const bool within = c.discrepancy <= cfg.oracle_tolerance;
    const bool bound_ok = !c.f_term_bound || c.f_term_norm <= *c.f_term_bound;
    nlohmann::json j = {{"discrepancy", c.discrepancy},
                        {"tolerance", cfg.oracle_tolerance},
                        {"v", c.v},
                        {"modes", table},
                        {"f_term_norm", c.f_term_norm},
                        {"pass", within && bound_ok}};
    if (c.f_term_bound) {
        j["f_term_bound"] = *c.f_term_bound;
    } else {
        j["f_term_bound"] = nullptr;
    }
    write_json(out / "compare.json", j);
    std::ostringstream modes;
    spectral::write_modes_csv(modes, c.spectral_after);
    write_text_atomic(out / "modes.csv", modes.str());
    detail::write_timings(out, {{"runtime_seconds", detail::seconds_since(t0)}});
    return within && bound_ok ? kOk : kVerificationFailed;
}

// sweep ----------------------------------------------------------------------------

struct SweepRow {
    double value = 0.0;
    double error = std::numeric_limits<double>::quiet_NaN();
    double bound = std::numeric_limits<double>::quiet_NaN();
    double order = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
    double runtime_seconds = 0.0;
};

inline ExperimentConfig with_parameter(ExperimentConfig c, const std::string& p, double value) {
    if (p == "T") {
        c.horizon = value;
    } else if (p == "dt") {
        c.dt = value;
    } else if (p == "n") {
        if (value != std::round(value)) throw ConfigError("sweep: n values must be integers");
        c.n = static_cast<int>(value);
    } else if (p == "eps") {
        c.eps = value;
    } else {
        throw ConfigError("sweep: parameter must be one of T, dt, n, eps");
    }
    return c;
}

/// Step-size measure used for empirical orders: dt, or h for n.
inline double resolution(const std::string& p, double value) { return p == "n" ? 1.0 / (value + 1.0) : value; }

inline SweepRow sweep_row(const ExperimentConfig& c, const std::string& p, double value) {
    SweepRow row;
    row.value = value;
    if (p == "eps") {
        const SynthesisOutcome o = synthesize(c);
        row.error = o.final_error;
        row.bound = *c.eps;
        if (!o.success) row.status = "eps not reached";
        return row;
    }
    const ProblemSpec problem = c.problem();
    const ControlSchedule sched = c.schedule();
    if (c.sweep_metric == "oracle_error") {
        row.error = oracle_compare(problem, sched, c.dt, c.solve_options()).discrepancy;
        return row;
    }
    const ScalarField ustar = c.target_field();
    SolveOptions opts = c.solve_options();
    opts.keep_states = false;
    row.error = l2_distance(solve(problem, sched, c.dt, opts).final_state(), ustar);
    if (c.control.kind == "thm14") {
        const ScalarField v0 = sched.step(0) * c.horizon;
        row.bound = estimates::thm14_error_bound(problem.u0, v0, problem.f.lipschitz(), c.horizon);
        if (row.error > row.bound) row.status = "bound exceeded";
    }
    return row;
}

inline std::vector<SweepRow> sweep(const ExperimentConfig& cfg) {
    const std::string& p = cfg.sweep_parameter;
    if (cfg.sweep_values.empty()) throw ConfigError("sweep: needs sweep.values");
    (void)with_parameter(cfg, p, cfg.sweep_values.front());
    std::vector<SweepRow> rows;
    for (double value : cfg.sweep_values) {
        const auto t0 = std::chrono::steady_clock::now();
        SweepRow row;
        try {
            row = sweep_row(with_parameter(cfg, p, value), p, value);
        } catch (const std::exception& e) {
            row.value = value;
            row.status = std::string("error: ") + e.what();
        }
        row.runtime_seconds = detail::seconds_since(t0);
        if (!rows.empty() && p != "eps") {
            const SweepRow& prev = rows.back();
            const double ratio = resolution(p, prev.value) / resolution(p, value);
            if (prev.error > 0.0 && row.error > 0.0 && ratio != 1.0)
                row.order = std::log(prev.error / row.error) / std::log(ratio);
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::string csv_cell(double v) { return std::isnan(v) ? "" : format_double(v); }

inline int run_sweep(const ExperimentConfig& cfg, const fs::path& out) {
    const std::vector<SweepRow> rows = sweep(cfg);
    std::ostringstream csv;
    csv << "parameter,value,error,bound,order,status\n";
    nlohmann::json timings = nlohmann::json::array();
    bool all = true;
    for (const auto& r : rows) {
        std::string status = r.status;
        for (char& ch : status)
            if (ch == ',' || ch == '\n') ch = ';';
        csv << cfg.sweep_parameter << ',' << format_double(r.value) << ',' << csv_cell(r.error) << ','
            << csv_cell(r.bound) << ',' << csv_cell(r.order) << ',' << status << '\n';
        timings.push_back({{"value", r.value}, {"runtime_seconds", r.runtime_seconds}});
        all = all && r.status == "ok";
    }
    write_text_atomic(out / "sweep.csv", csv.str());
    detail::write_timings(out, {{"rows", timings}});
    return all ? kOk : kVerificationFailed;
}

// dispatch -------------------------------------------------------------------------

/// Loads the config, applies the seed override, runs the subcommand, and maps
/// errors to exit codes: 2 config/alignment/stability, 3 precondition, 1 other.
inline int run_command(const std::string& command, const fs::path& config_path, const fs::path& out_dir,
                       std::optional<std::uint64_t> seed, std::ostream& err = std::cerr) {
    try {
        ExperimentConfig cfg = load_config(config_path);
        if (seed) {
            cfg.seed = *seed;
            cfg.resolved["seed"] = *seed;
        }
        fs::path out = out_dir.empty() ? fs::path(cfg.output.empty() ? "." : cfg.output) : out_dir;
        fs::create_directories(out);
        write_manifest(out, command, cfg);
        if (command == "simulate") return run_simulate(cfg, out);
        if (command == "synthesize") return run_synthesize(cfg, out);
        if (command == "verify") return run_verify(cfg, out);
        if (command == "sweep") return run_sweep(cfg, out);
        if (command == "oracle-compare") return run_oracle_compare(cfg, out);
        throw ConfigError("unknown subcommand '" + command + "'");
    } catch (const PreconditionError& e) {
        err << "precondition violated: " << e.what() << '\n';
        return kPreconditionFailed;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kConfigError;
    } catch (const fs::filesystem_error& e) {
        err << "configuration error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kVerificationFailed;
    }
}

}  // namespace mctl::runner
