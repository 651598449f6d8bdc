// Machine checks of the a-priori estimates on recorded traces.
//
// Each verifier compares a measured left-hand side with the right-hand side of
// an energy inequality; pass means lhs <= rhs (1 + tol). Hypotheses of an
// estimate (sign of v, L T <= 1/4, ...) are reported, never thrown.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mctl/dynamics.hpp"
#include "mctl/error.hpp"
#include "mctl/field.hpp"
#include "mctl/schedule.hpp"

namespace mctl::estimates {

inline constexpr double kDefaultTolerance = 1e-3;

struct BoundReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double tol = kDefaultTolerance;
    bool pass = false;
    bool hypothesis_ok = true;
    std::string note;

    [[nodiscard]] double slack() const noexcept { return rhs - lhs; }
};

inline BoundReport make_report(std::string name, double lhs, double rhs, double tol, bool hypothesis_ok = true,
                               std::string note = {}) {
    BoundReport r{std::move(name), lhs, rhs, tol, false, hypothesis_ok, std::move(note)};
    r.pass = lhs <= rhs * (1.0 + tol);
    return r;
}

/// max |Lap v| over the grid, with the control's ghost values extrapolated.
inline double max_abs_laplacian(const ScalarField& v) { return linf_norm(laplacian(v, Ghost::extrapolate)); }

/// C(L, T, v) = sqrt(1 + 2 T max|Lap v| + 2 L^2 T)
inline double c_constant(double lipschitz, double horizon, const ScalarField& v) {
    if (!(horizon > 0.0)) throw ConfigError("c_constant: T must be positive");
    return std::sqrt(1.0 + 2.0 * horizon * max_abs_laplacian(v) + 2.0 * lipschitz * lipschitz * horizon);
}

/// sqrt(2 T (1 + 2 max|Lap v0*| + 4 L^2 T)) ||u0||_{H1_0}: the steering error
/// bound of the static control v0* / T.
inline double thm14_error_bound(const ScalarField& u0, const ScalarField& v0_star, double lipschitz, double horizon) {
    if (!(horizon > 0.0)) throw ConfigError("thm14_error_bound: T must be positive");
    const double inner_term =
        1.0 + 2.0 * max_abs_laplacian(v0_star) + 4.0 * lipschitz * lipschitz * horizon;
    return std::sqrt(2.0 * horizon * inner_term) * h10_norm(u0);
}

namespace detail {

inline double max_l2(const SolveTrace& t) {
    double m = 0.0;
    for (const auto& r : t.records) m = std::max(m, r.l2_u);
    return m;
}

inline void require_horizon(const SolveTrace& t, double horizon, const char* what) {
    if (std::abs(t.horizon() - horizon) > 1e-9 * std::max(1.0, horizon))
        throw ConfigError(std::string(what) + ": trace horizon differs from T");
}

}  // namespace detail

/// The three bounds for a static control v <= 0 on a horizon T <= 1/(4L):
/// sup ||u|| <= sqrt2 ||u0||, sup ||f(u)|| <= sqrt2 L ||u0||, and
/// ||Lap u||_{L2(0,T;L2)} <= C(L,T,v) ||u0||_{H1_0}.
inline std::array<BoundReport, 3> verify_prop21(const SolveTrace& trace, double lipschitz, const ScalarField& v,
                                                double horizon, double tol = kDefaultTolerance) {
    detail::require_horizon(trace, horizon, "verify_prop21");
    std::string note;
    if (v.max() > 0.0) note = "hypothesis violated: control has a positive part";
    if (lipschitz * horizon > 0.25 * (1.0 + 1e-12)) {
        if (!note.empty()) note += "; ";
        note += "hypothesis violated: L T > 1/4";
    }
    const bool hyp = note.empty();

    const ScalarField& u0 = trace.initial();
    const double u0_l2 = l2_norm(u0);
    double max_f = 0.0;
    for (const auto& r : trace.records) max_f = std::max(max_f, r.l2_f_u);
    double lap_sq = 0.0;
    for (std::size_t j = 1; j < trace.records.size(); ++j) {
        const double dt = trace.times[j] - trace.times[j - 1];
        lap_sq += dt * trace.records[j].l2_lap_u * trace.records[j].l2_lap_u;
    }
    return {
        make_report("prop21_state", detail::max_l2(trace), std::numbers::sqrt2 * u0_l2, tol, hyp, note),
        make_report("prop21_reaction", max_f, std::numbers::sqrt2 * lipschitz * u0_l2, tol, hyp, note),
        make_report("prop21_laplacian", std::sqrt(lap_sq), c_constant(lipschitz, horizon, v) * h10_norm(u0), tol,
                    hyp, note),
    };
}

/// sup_t ||u(t)|| <= exp((L + ||v+||_inf) T) ||u0|| for any bounded control.
inline BoundReport verify_prop22(const SolveTrace& trace, double lipschitz, const ControlSchedule& schedule,
                                 double tol = kDefaultTolerance) {
    const double growth = std::exp((lipschitz + schedule.max_positive_part()) * trace.horizon());
    return make_report("prop22_growth", detail::max_l2(trace), growth * l2_norm(trace.initial()), tol);
}

/// sup_t ||u_a(t) - u_b(t)|| <= exp((L + ||v+||_inf) T) ||u_a(0) - u_b(0)||.
inline BoundReport verify_contraction(const SolveTrace& a, const SolveTrace& b, double lipschitz,
                                      const ControlSchedule& schedule, double tol = kDefaultTolerance) {
    if (!(a.grid == b.grid) || a.times.size() != b.times.size() || a.dt != b.dt)
        throw ConfigError("verify_contraction: traces come from different discretizations");
    if (!a.all_states || !b.all_states) throw ConfigError("verify_contraction: traces must keep all states");
    double lhs = 0.0;
    for (std::size_t j = 0; j < a.states.size(); ++j) lhs = std::max(lhs, l2_distance(a.states[j], b.states[j]));
    const double growth = std::exp((lipschitz + schedule.max_positive_part()) * a.horizon());
    return make_report("contraction", lhs, growth * l2_distance(a.initial(), b.initial()), tol);
}

inline constexpr double kNonnegFloor = 1e-12;

/// Every recorded state stays >= -1e-12. lhs is the worst negative excursion.
inline BoundReport verify_nonneg(const SolveTrace& trace) {
    double worst = 0.0;
    for (const auto& r : trace.records) worst = std::max(worst, -r.min_u);
    const bool hyp = trace.initial().min() >= 0.0;
    BoundReport rep = make_report("nonnegativity", worst, kNonnegFloor, 0.0, hyp,
                                  hyp ? "" : "precondition unmet: initial state has a negative node");
    if (!hyp) rep.pass = false;
    return rep;
}

// Epsilon ledger of the two-phase construction ------------------------------

/// Stage measurements of one synthesis run. `initial_approximation` compares
/// the smooth approximant with the state the two-phase steering starts from.
struct StageMeasurements {
    double target_approximation = 0.0;   // ||u*_eps - u*||
    double initial_approximation = 0.0;  // ||u0_eps - u0||
    double cutoff = 0.0;                 // ||u*_eta - u*_eps||
    double semigroup = 0.0;              // ||linear part at T1 - M u0_eps||
    double phase1_smooth = 0.0;          // ||u_eps(T1) - M u0_eps||
    double phase1 = 0.0;                 // ||u(T1) - M u0_eps|| = ||delta0||
    double phase2 = 0.0;                 // ||u~(T) - u*_eta||
    double t1 = 0.0;
    double v1 = 0.0;
};

struct LedgerEntry {
    std::string name;
    double measured = 0.0;
    double budget = 0.0;
    bool pass = false;
};

struct BudgetLedger {
    double eps = 0.0;
    std::vector<LedgerEntry> entries;
    /// exp((L + v1) T1) eps / (16 e^L M) + eps/16 <= eps/8
    double closure_lhs = 0.0;
    double closure_rhs = 0.0;
    bool closure_pass = false;

    [[nodiscard]] bool all_pass() const {
        return closure_pass && std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
    }
};

/// Checks the identity exp((L + v1) T1) eps/(16 e^L M) + eps/16 <= eps/8 given
/// exp(v1 T1) = M and T1 <= 1. Returns {lhs, rhs}.
inline std::pair<double, double> closure_terms(double eps, double lipschitz, double amplification, double t1,
                                               double v1) {
    const double lhs =
        std::exp((lipschitz + v1) * t1) * eps / (16.0 * std::exp(lipschitz) * amplification) + eps / 16.0;
    return {lhs, eps / 8.0};
}

inline BudgetLedger budget_ledger(double eps, double lipschitz, double amplification, const StageMeasurements& s) {
    if (!(eps > 0.0)) throw ConfigError("budget_ledger: eps must be positive");
    BudgetLedger led;
    led.eps = eps;
    auto add = [&](std::string name, double measured, double budget) {
        led.entries.push_back({std::move(name), measured, budget, measured < budget});
    };
    add("target_approximation", s.target_approximation, eps / 4.0);
    add("initial_approximation", s.initial_approximation, eps / (16.0 * std::exp(lipschitz) * amplification));
    add("cutoff_target", s.cutoff, eps / 4.0);
    add("semigroup_term", s.semigroup, eps / 32.0);
    add("phase1_smooth", s.phase1_smooth, eps / 16.0);
    add("phase1", s.phase1, eps / 8.0);
    add("phase1_remainder", s.phase1, eps / (4.0 * std::numbers::sqrt2));
    add("phase2", s.phase2, eps / 4.0);

    const auto [lhs, rhs] = closure_terms(eps, lipschitz, amplification, s.t1, s.v1);
    led.closure_lhs = lhs;
    led.closure_rhs = rhs;
    const bool consistent = std::abs(std::exp(s.v1 * s.t1) - amplification) <= 1e-9 * amplification;
    led.closure_pass = consistent && s.t1 <= 1.0 && lhs <= rhs * (1.0 + 1e-12);
    return led;
}

}  // namespace mctl::estimates
