// Control synthesis for u_t = Lap u + v u + f(u).
//
// Static steering: v = ln(u*/u0) / T reaches u* exactly when diffusion and f
// are absent, and approximately otherwise.
//
// Two-phase steering from a state s toward u*: smooth positive approximants
// s_eps ~ s, u*_eps ~ u* with u*_eps / s_eps <= M, then
//   phase 1: constant v1 = ln M / T1 on [0, T1], so u(T1) ~ M s_eps,
//   phase 2: static v0_eta / (W - T1) on (T1, W], steering M s_eps to the
//            cut-off target u*_eta = chi_eta u*_eps.
// steer() reaches the two-phase window after a lead-in of clamped static
// re-synthesis steps that bring the state close to u*.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mctl/dynamics.hpp"
#include "mctl/error.hpp"
#include "mctl/estimates.hpp"
#include "mctl/field.hpp"
#include "mctl/schedule.hpp"

namespace mctl::synthesis {

// Static control -------------------------------------------------------------

struct RatioCheck {
    bool ok = false;
    double nu = 0.0;
    double max_ratio = 0.0;
};

/// 0 < nu <= u*/u0 <= 1 at every interior node.
inline RatioCheck check_ratio_condition(const ScalarField& u0, const ScalarField& ustar) {
    u0.check_same(ustar);
    RatioCheck r{false, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (std::size_t k = 0; k < u0.size(); ++k) {
        if (u0[k] == 0.0) throw PreconditionError("ratio condition: u0 vanishes at node " + std::to_string(k));
        const double q = ustar[k] / u0[k];
        r.nu = std::min(r.nu, q);
        r.max_ratio = std::max(r.max_ratio, q);
    }
    r.ok = r.nu > 0.0 && r.max_ratio <= 1.0 + 1e-12;
    return r;
}

/// v = ln(u*/u0) / T, which is <= 0 when the ratio condition holds.
inline ScalarField static_control_thm14(const ScalarField& u0, const ScalarField& ustar, double horizon) {
    if (!(horizon > 0.0)) throw ConfigError("static control: T must be positive");
    const RatioCheck rc = check_ratio_condition(u0, ustar);
    if (!rc.ok)
        throw PreconditionError("static control: ratio u*/u0 must lie in (0, 1]; got [" + format_double(rc.nu) +
                                ", " + format_double(rc.max_ratio) + "]");
    ScalarField v(u0.grid());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::min(0.0, std::log(ustar[k] / u0[k]) / horizon);
    return v;
}

// Approximants and cut-off targets -------------------------------------------

/// Product of sines with unit maximum: positive inside, zero on the boundary.
inline ScalarField first_mode(const Grid& g) {
    return ScalarField::sample(g, [&g](double x, double y) {
        double s = std::sin(std::numbers::pi * x / g.length(0));
        if (g.dim() == 2) s *= std::sin(std::numbers::pi * y / g.length(1));
        return s;
    });
}

struct ApproximantPair {
    ScalarField u0_eps;
    ScalarField ustar_eps;
    double amplification = 1.0;
    double sigma = 0.0;
    double delta_floor = 0.0;
    int iterations = 0;
    double target_error = 0.0;
    double initial_error = 0.0;
};

inline double amplification_for(const ScalarField& u0_eps, const ScalarField& ustar_eps) {
    double q = 0.0;
    for (std::size_t k = 0; k < u0_eps.size(); ++k) q = std::max(q, ustar_eps[k] / u0_eps[k]);
    return std::max(1.05, 1.01 * q);
}

inline constexpr int kMaxShrink = 40;

/// Mollify both states with width sigma, lift by delta * first_mode, and
/// halve (sigma, delta) until ||u*_eps - u*|| < eps/4 and
/// ||u0_eps - u0|| < eps / (16 e^L M).
inline ApproximantPair build_approximants(const ScalarField& u0, const ScalarField& ustar, double eps,
                                          double lipschitz) {
    u0.check_same(ustar);
    if (!(eps > 0.0)) throw ConfigError("approximants: eps must be positive");
    if (u0.min() < 0.0 || ustar.min() < 0.0) throw PreconditionError("approximants: states must be nonnegative");
    if (linf_norm(u0) == 0.0) throw PreconditionError("approximants: u0 is identically zero");
    const Grid& g = u0.grid();
    const ScalarField phi = first_mode(g);
    double sigma = g.min_length() / 16.0;
    double delta = 0.05 * std::max(linf_norm(u0), linf_norm(ustar));
    for (int it = 1; it <= kMaxShrink; ++it) {
        ApproximantPair p;
        p.u0_eps = mollify(u0, sigma) + delta * phi;
        p.ustar_eps = mollify(ustar, sigma) + delta * phi;
        p.amplification = amplification_for(p.u0_eps, p.ustar_eps);
        p.sigma = sigma;
        p.delta_floor = delta;
        p.iterations = it;
        p.target_error = l2_distance(p.ustar_eps, ustar);
        p.initial_error = l2_distance(p.u0_eps, u0);
        const double init_budget = eps / (16.0 * std::exp(lipschitz) * p.amplification);
        if (p.target_error < eps / 4.0 && p.initial_error < init_budget) return p;
        sigma *= 0.5;
        delta *= 0.5;
    }
    throw NumericalError("approximants: budgets not met after 40 shrink steps");
}

/// ||(1 - chi_eta) w||: the part of w the cutoff removes.
inline double strip_mass(const ScalarField& w, double eta) {
    ScalarField rest = w;
    const ScalarField chi = cutoff(w.grid(), eta);
    for (std::size_t k = 0; k < rest.size(); ++k) rest[k] *= 1.0 - chi[k];
    return l2_norm(rest);
}

/// Largest eta in the halving sequence from eta_max (default: a quarter of the
/// shortest side) with strip_mass(w, eta) < budget.
inline double choose_eta_for(const ScalarField& w, double budget, double eta_max = 0.0) {
    double eta = eta_max > 0.0 ? eta_max : 0.25 * w.grid().min_length();
    while (strip_mass(w, eta) >= budget) {
        eta *= 0.5;
        if (eta < 1e-3 * w.grid().min_h())
            throw NumericalError("choose_eta: strip mass does not fall below the budget");
    }
    return eta;
}

inline double choose_eta(const ScalarField& ustar_eps, double eps) { return choose_eta_for(ustar_eps, eps / 4.0); }

struct CutoffTargets {
    ScalarField u_eta_star;
    ScalarField v0_eta;
};

/// u*_eta = chi u*_eps and v0_eta = chi ln(u*_eps / (M u0_eps)) <= 0.
inline CutoffTargets cutoff_targets(const ApproximantPair& pair, double eta) {
    const Grid& g = pair.u0_eps.grid();
    const ScalarField chi = cutoff(g, eta);
    CutoffTargets out{ScalarField(g), ScalarField(g)};
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double q = pair.ustar_eps[k] / (pair.amplification * pair.u0_eps[k]);
        if (!(q > 0.0) || q > 1.0 + 1e-12)
            throw NumericalError("cutoff targets: ratio / M = " + format_double(q) + " outside (0, 1] at node " +
                                 std::to_string(k));
        out.u_eta_star[k] = chi[k] * pair.ustar_eps[k];
        out.v0_eta[k] = std::min(0.0, chi[k] * std::log(q));
    }
    return out;
}

// Phase 1 ----------------------------------------------------------------------

/// v1 = ln M / T1, so exp(v1 T1) = M.
inline double phase1_control(double amplification, double t1) {
    if (!(amplification > 1.0)) throw PreconditionError("phase 1: M must exceed 1");
    if (!(t1 > 0.0)) throw ConfigError("phase 1: T1 must be positive");
    return std::log(amplification) / t1;
}

inline constexpr long kPhase1Steps = 64;
inline constexpr long kMaxPhase1Steps = 1L << 14;

/// Step count for a phase-1 solve: a power of two >= 64 keeping the implicit
/// scheme's amplification error, about (ln M)^2 / (2 N) relative, below rel_tol.
inline long phase1_steps(double amplification, double rel_tol = 1e-3) {
    const double lm = std::log(amplification);
    long s = kPhase1Steps;
    while (lm * lm / (2.0 * static_cast<double>(s)) > rel_tol && s < kMaxPhase1Steps) s *= 2;
    return s;
}

struct T1Search {
    bool found = false;
    double t1 = 0.0;
    double v1 = 0.0;
    double dt = 0.0;
    /// ||u(T1) - M u0_eps|| with u started from the true state.
    double phase1 = 0.0;
    /// Same, started from u0_eps.
    double phase1_smooth = 0.0;
    /// Same, started from u0_eps with f dropped.
    double semigroup = 0.0;
    int halvings = 0;
    double best_phase1 = std::numeric_limits<double>::infinity();
};

inline constexpr double kMinT1 = 1e-9;

/// Halving search from T1 = min(0.01, T/4) for the first T1 whose phase-1
/// solves meet ||u(T1) - M u0_eps|| <= eps/8, the smooth-start error < eps/16
/// and the linear-part error < eps/32.
inline T1Search find_T1(const ProblemSpec& problem, const ApproximantPair& pair, double eps) {
    problem.validate();
    T1Search out;
    const ScalarField target = pair.amplification * pair.u0_eps;
    const double target_norm = l2_norm(target);
    const long steps =
        phase1_steps(pair.amplification, target_norm > 0.0 ? std::min(1e-3, eps / (64.0 * target_norm)) : 1e-3);
    SolveOptions keep_last;
    keep_last.keep_states = false;
    SolveOptions linear = keep_last;
    linear.reaction = false;
    for (double t1 = std::min(0.01, problem.horizon / 4.0); t1 >= kMinT1; t1 *= 0.5, ++out.halvings) {
        const double v1 = phase1_control(pair.amplification, t1);
        const double dt = t1 / static_cast<double>(steps);
        const ControlSchedule sched = ControlSchedule::constant(problem.grid, v1, t1);
        const double e_true = l2_distance(
            solve({problem.grid, problem.f, problem.u0, t1}, sched, dt, keep_last).final_state(), target);
        if (out.halvings >= 3 && e_true > 0.9 * out.best_phase1) break;
        out.best_phase1 = std::min(out.best_phase1, e_true);
        if (e_true > eps / 8.0) continue;
        const double e_smooth = l2_distance(
            solve({problem.grid, problem.f, pair.u0_eps, t1}, sched, dt, keep_last).final_state(), target);
        if (e_smooth >= eps / 16.0) continue;
        const double e_lin = l2_distance(
            solve({problem.grid, problem.f, pair.u0_eps, t1}, sched, dt, linear).final_state(), target);
        if (e_lin >= eps / 32.0) continue;
        out = {true, t1, v1, dt, e_true, e_smooth, e_lin, out.halvings, out.best_phase1};
        return out;
    }
    return out;
}

// Schedules --------------------------------------------------------------------

struct SynthesisPlan {
    double eta = 0.0;
    ScalarField u_eta_star;
    ScalarField v0_eta;
    double v1 = 0.0;
    double t1 = 0.0;
    /// Number of lead-in steps before the two-phase window.
    int n_iter = 0;
    double lead_time = 0.0;
    double window = 0.0;
    double amplification = 1.0;
};

/// Constant v1 on [0, T1], then v0_eta / (T - T1) on (T1, T].
inline ControlSchedule two_phase_schedule(const SynthesisPlan& plan, double horizon) {
    if (!(horizon > plan.t1)) throw ConfigError("two-phase schedule: T must exceed T1");
    const Grid& g = plan.v0_eta.grid();
    return ControlSchedule({0.0, plan.t1, horizon},
                           {ScalarField(g, plan.v1), (1.0 / (horizon - plan.t1)) * plan.v0_eta});
}

/// Largest dt <= dt_max that divides `length` into a whole number of steps.
inline double fitted_dt(double length, double dt_max) {
    return length / std::ceil(length / dt_max - 1e-9);
}

struct RefineResult {
    /// Breakpoints run over [0, t_end - t_start].
    ControlSchedule schedule;
    std::vector<double> step_dt;
    ScalarField final_state;
    /// ||state - target|| after each subinterval.
    std::vector<double> errors;
};

/// n equal subintervals; on each the clamped static control
/// min(0, ln((target + fl) / (current + fl))) / dt_k, where current is the
/// simulated state entering the subinterval and fl = 1e-12 max|target|.
inline RefineResult refine_iterate(const ScalarField& current, const ScalarField& target, double t_start,
                                   double t_end, int n, const Nonlinearity& f, double dt_max) {
    current.check_same(target);
    if (n < 1) throw ConfigError("refine: n must be >= 1");
    if (!(t_end > t_start)) throw ConfigError("refine: empty interval");
    const Grid& g = current.grid();
    const double len = (t_end - t_start) / n;
    const double dt = fitted_dt(len, dt_max);
    const double fl = 1e-12 * linf_norm(target);
    SolveOptions opts;
    opts.keep_states = false;
    std::vector<double> bp{0.0};
    std::vector<ScalarField> steps;
    RefineResult out{ControlSchedule(), {}, current, {}};
    for (int k = 0; k < n; ++k) {
        ScalarField v(g);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double num = target[i] + fl, den = out.final_state[i] + fl;
            v[i] = (num > 0.0 && den > 0.0) ? std::min(0.0, std::log(num / den) / len) : 0.0;
        }
        out.final_state =
            solve({g, f, out.final_state, len}, ControlSchedule::constant(v, len), dt, opts).final_state();
        out.errors.push_back(l2_distance(out.final_state, target));
        bp.push_back(k + 1 == n ? t_end - t_start : (k + 1) * len);
        steps.push_back(std::move(v));
        out.step_dt.push_back(dt);
    }
    out.schedule = ControlSchedule(std::move(bp), std::move(steps));
    return out;
}

// Full pipeline ----------------------------------------------------------------

struct SteerOptions {
    /// Largest dt for lead-in and phase-2 solves.
    double dt_max = 1e-4;
    /// Lead-in subinterval length target.
    double lead_interval = 0.05;
    /// The lead-in steers toward u* + lift * max|u*| * first_mode, which keeps
    /// the state entering the window comparable to u* everywhere.
    double lead_lift = 0.25;
    /// Number of window halvings tried before giving up.
    int max_windows = 24;
};

struct SynthesisReport {
    SynthesisPlan plan;
    double sigma = 0.0;
    double delta_floor = 0.0;
    int approximant_iterations = 0;
    int t1_halvings = 0;
    int windows_tried = 0;
    estimates::StageMeasurements stages;
    estimates::BudgetLedger ledger;
    double eps = 0.0;
    double phase1_error = 0.0;
    double final_error = 0.0;
    double thm14_bound_phase2 = 0.0;
    bool success = false;
    std::string note;
    std::vector<double> step_dt;
    ScalarField final_state;
    double runtime_seconds = 0.0;
};

struct SteerResult {
    ControlSchedule schedule;
    SynthesisReport report;
};

namespace detail {

inline void require_steerable(const ProblemSpec& problem, const ScalarField& ustar, double eps) {
    problem.validate();
    problem.u0.check_same(ustar);
    if (!(eps > 0.0)) throw ConfigError("steer: eps must be positive");
    if (problem.u0.min() < 0.0 || ustar.min() < 0.0)
        throw PreconditionError("steer: initial and target states must be nonnegative");
    if (linf_norm(problem.u0) == 0.0)
        throw PreconditionError("steer: u0 is identically zero, and the zero state cannot be steered anywhere");
}

/// One attempt with a two-phase window of length W at the end of [0, T].
inline std::optional<SteerResult> try_window(const ProblemSpec& problem, const ScalarField& ustar, double eps,
                                             double window, const SteerOptions& opts, std::string& why) {
    const Grid& g = problem.grid;
    const double lipschitz = problem.f.lipschitz();
    const double lead = problem.horizon - window;
    SynthesisPlan plan;
    plan.window = window;
    plan.lead_time = lead;

    std::optional<RefineResult> lead_in;
    ScalarField start = problem.u0;
    if (lead > 1e-12 * problem.horizon) {
        const int n = std::max(1, static_cast<int>(std::ceil(lead / opts.lead_interval - 1e-9)));
        const double scale = linf_norm(ustar) > 0.0 ? linf_norm(ustar) : linf_norm(problem.u0);
        const ScalarField lead_target = ustar + (opts.lead_lift * scale) * first_mode(g);
        lead_in = refine_iterate(problem.u0, lead_target, 0.0, lead, n, problem.f, opts.dt_max);
        start = lead_in->final_state;
        plan.n_iter = n;
    } else {
        plan.lead_time = 0.0;
    }
    if (start.min() <= 0.0) {
        why = "state entering the window is not positive";
        return std::nullopt;
    }

    const ApproximantPair pair = build_approximants(start, ustar, eps, lipschitz);
    plan.amplification = pair.amplification;
    const ScalarField lifted = pair.amplification * pair.u0_eps;
    plan.eta = choose_eta(pair.ustar_eps, eps);
    if (strip_mass(lifted, plan.eta) >= eps / 16.0) plan.eta = choose_eta_for(lifted, eps / 16.0, plan.eta);
    const CutoffTargets tg = cutoff_targets(pair, plan.eta);
    plan.u_eta_star = tg.u_eta_star;
    plan.v0_eta = tg.v0_eta;

    const ProblemSpec window_problem{g, problem.f, start, window};
    const T1Search t1 = find_T1(window_problem, pair, eps);
    if (!t1.found) {
        why = "no T1 meets the phase-1 budgets (best phase-1 error " + format_double(t1.best_phase1) + ")";
        return std::nullopt;
    }
    plan.t1 = t1.t1;
    plan.v1 = t1.v1;
    const double phase2_len = window - t1.t1;
    if (lipschitz > 0.0 && phase2_len > 0.25 / lipschitz) {
        why = "phase 2 longer than 1/(4L)";
        return std::nullopt;
    }

    const ControlSchedule two_phase = two_phase_schedule(plan, window);
    const double dt2 = fitted_dt(phase2_len, std::min(opts.dt_max, phase2_len / 64.0));

    SolveOptions last_only;
    last_only.keep_states = false;
    const ScalarField phase2_end =
        solve({g, problem.f, lifted, phase2_len}, ControlSchedule::constant(two_phase.step(1), phase2_len), dt2,
              last_only)
            .final_state();

    SteerResult res;
    res.schedule = lead_in ? lead_in->schedule.then(two_phase) : two_phase;
    std::vector<double> dts = lead_in ? lead_in->step_dt : std::vector<double>{};
    dts.push_back(t1.dt);
    dts.push_back(dt2);

    const SolveTrace full = solve_piecewise(problem, res.schedule, dts, last_only);
    SynthesisReport& rep = res.report;
    rep.plan = plan;
    rep.sigma = pair.sigma;
    rep.delta_floor = pair.delta_floor;
    rep.approximant_iterations = pair.iterations;
    rep.t1_halvings = t1.halvings;
    rep.eps = eps;
    rep.phase1_error = t1.phase1;
    rep.step_dt = dts;
    rep.final_state = full.final_state();
    rep.final_error = l2_distance(full.final_state(), ustar);
    rep.thm14_bound_phase2 = estimates::thm14_error_bound(lifted, plan.v0_eta, lipschitz, phase2_len);

    estimates::StageMeasurements& s = rep.stages;
    s.target_approximation = pair.target_error;
    s.initial_approximation = pair.initial_error;
    s.cutoff = l2_distance(plan.u_eta_star, pair.ustar_eps);
    s.semigroup = t1.semigroup;
    s.phase1_smooth = t1.phase1_smooth;
    s.phase1 = t1.phase1;
    s.phase2 = l2_distance(phase2_end, plan.u_eta_star);
    s.t1 = t1.t1;
    s.v1 = t1.v1;
    rep.ledger = estimates::budget_ledger(eps, lipschitz, pair.amplification, s);
    rep.success = rep.final_error < eps && rep.ledger.all_pass();
    if (!rep.success) why = "final error " + format_double(rep.final_error) + " with ledger " +
                            (rep.ledger.all_pass() ? "passing" : "failing");
    return res;
}

}  // namespace detail

/// Steers problem.u0 toward u* over [0, T]. Tries two-phase windows W = T,
/// T/2, T/4, ... preceded by a clamped lead-in on [0, T - W], and returns the
/// first attempt whose recomputed final error is below eps with every ledger
/// entry met; otherwise the attempt with the smallest final error.
inline SteerResult steer(const ProblemSpec& problem, const ScalarField& ustar, double eps,
                         const SteerOptions& opts = {}) {
    const auto start = std::chrono::steady_clock::now();
    detail::require_steerable(problem, ustar, eps);
    std::optional<SteerResult> best;
    std::string why;
    int tried = 0;
    double window = problem.horizon;
    for (int w = 0; w < opts.max_windows; ++w, window *= 0.5) {
        ++tried;
        std::string reason;
        std::optional<SteerResult> r;
        try {
            r = detail::try_window(problem, ustar, eps, window, opts, reason);
        } catch (const NumericalError& e) {
            reason = e.what();
        }
        if (!r) {
            why = "window " + format_double(window) + ": " + reason;
            continue;
        }
        const bool better = !best || r->report.final_error < best->report.final_error;
        if (r->report.success) {
            best = std::move(r);
            break;
        }
        why = "window " + format_double(window) + ": " + reason;
        if (better) best = std::move(r);
    }
    if (!best) throw NumericalError("steer: no window produced a schedule; last: " + why);
    best->report.windows_tried = tried;
    if (!best->report.success) best->report.note = why;
    best->report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return std::move(*best);
}

}  // namespace mctl::synthesis
