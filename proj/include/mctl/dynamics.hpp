// Semilinear reaction-diffusion with a multiplicative control,
//
//   u_t = Lap u + v(x, t) u + f(u)   in the domain,  u = 0 on the boundary,
//
// advanced by IMEX backward Euler: Lap + v u implicit, f explicit,
//
//   (I - dt Lap_h - dt diag(v)) u+ = u + dt f(u).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <optional>
#include <vector>

#include "mctl/error.hpp"
#include "mctl/field.hpp"
#include "mctl/field_io.hpp"
#include "mctl/linalg.hpp"
#include "mctl/nonlinearity.hpp"
#include "mctl/schedule.hpp"

namespace mctl {

struct ProblemSpec {
    Grid grid;
    Nonlinearity f;
    ScalarField u0;
    double horizon = 0.0;

    void validate() const {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("problem: horizon T must be positive");
        if (!(u0.grid() == grid)) throw ConfigError("problem: initial state is not on the problem grid");
    }
};

enum class LinearSolver { direct, conjugate_gradient };

struct SolveOptions {
    /// Off: pure-reaction diagnostic, each node integrated as an ODE.
    bool diffusion = true;
    /// Off: f is dropped from the right-hand side.
    bool reaction = true;
    /// 2D only; 1D always uses tridiagonal elimination.
    LinearSolver solver = LinearSolver::conjugate_gradient;
    double cg_tolerance = 1e-12;
    /// Off: only the initial and final states are stored (records are kept).
    bool keep_states = true;
};

struct TraceRecord {
    double t = 0.0;
    double l2_u = 0.0;
    double linf_u = 0.0;
    double l2_f_u = 0.0;
    double l2_lap_u = 0.0;
    double min_u = 0.0;
};

/// Time-indexed output of one solve. Immutable once returned.
struct SolveTrace {
    Grid grid;
    Nonlinearity f;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<TraceRecord> records;
    std::vector<ScalarField> states;
    bool all_states = true;

    [[nodiscard]] std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
    [[nodiscard]] double horizon() const noexcept { return times.back(); }
    [[nodiscard]] const ScalarField& initial() const { return states.front(); }
    [[nodiscard]] const ScalarField& final_state() const { return states.back(); }

    [[nodiscard]] const ScalarField& state(std::size_t j) const {
        if (!all_states) throw ConfigError("trace: intermediate states were not kept");
        return states.at(j);
    }
};

// Stability guard ----------------------------------------------------------

struct GuardResult {
    bool ok = true;
    /// dt * max(L, max_k ||v_k^+||_inf); must not exceed 1/2.
    double value = 0.0;
    std::string detail;
};

inline GuardResult stability_guard(double dt, double max_positive_control, const Nonlinearity& f) {
    if (!(dt > 0.0)) throw ConfigError("stability guard: dt must be positive");
    GuardResult r;
    const bool control_dominates = max_positive_control >= f.lipschitz();
    r.value = dt * std::max(f.lipschitz(), max_positive_control);
    r.ok = r.value <= 0.5;
    if (!r.ok) {
        std::ostringstream os;
        os << "dt * " << (control_dominates ? "max v+" : "L") << " = " << r.value << " exceeds 1/2 (dt = " << dt
           << ", " << (control_dominates ? "max v+ = " : "L = ")
           << (control_dominates ? max_positive_control : f.lipschitz()) << ")";
        r.detail = os.str();
    }
    return r;
}

inline GuardResult stability_guard(double dt, const ControlSchedule& schedule, const Nonlinearity& f) {
    return stability_guard(dt, schedule.max_positive_part(), f);
}

// Implicit operator ----------------------------------------------------------

/// I - dt Lap_h - dt diag(v) (or I - dt diag(v) with diffusion off), factored
/// once for a static v and reused for every step of that schedule piece.
class ImplicitOperator {
public:
    ImplicitOperator(const ScalarField& v, double dt, bool diffusion = true,
                     LinearSolver solver = LinearSolver::conjugate_gradient, double cg_tolerance = 1e-12)
        : grid_(v.grid()), dt_(dt), diffusion_(diffusion), solver_(solver), cg_tol_(cg_tolerance) {
        const Grid& g = grid_;
        diag_.resize(g.size());
        double stencil = 0.0;
        if (diffusion_)
            for (int a = 0; a < g.dim(); ++a) stencil += 2.0 / (g.h(a) * g.h(a));
        for (std::size_t k = 0; k < g.size(); ++k) {
            diag_[k] = 1.0 + dt * stencil - dt * v[k];
            if (!(diag_[k] > 0.0)) throw StabilityError("implicit operator: nonpositive diagonal; dt * v+ too large");
        }
        if (!diffusion_) return;
        if (g.dim() == 1) {
            tri_ = linalg::Tridiagonal(diag_, -dt / (g.h(0) * g.h(0)));
        } else if (solver_ == LinearSolver::direct) {
            const std::size_t n = static_cast<std::size_t>(g.n());
            linalg::BandMatrix a(g.size(), n);
            const double ox = -dt / (g.h(0) * g.h(0)), oy = -dt / (g.h(1) * g.h(1));
            for (std::size_t k = 0; k < g.size(); ++k) {
                a.at(k, k) = diag_[k];
                if (k % n != 0) a.at(k, k - 1) = oy;
                if (k >= n) a.at(k, k - n) = ox;
            }
            chol_ = linalg::BandCholesky(std::move(a));
        }
    }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }

    void apply(std::span<const double> x, std::span<double> y) const {
        const Grid& g = grid_;
        if (!diffusion_) {
            for (std::size_t k = 0; k < g.size(); ++k) y[k] = diag_[k] * x[k];
            return;
        }
        const int n = g.n();
        if (g.dim() == 1) {
            const double o = -dt_ / (g.h(0) * g.h(0));
            for (int i = 0; i < n; ++i) {
                double s = diag_[i] * x[i];
                if (i > 0) s += o * x[i - 1];
                if (i + 1 < n) s += o * x[i + 1];
                y[i] = s;
            }
            return;
        }
        const double ox = -dt_ / (g.h(0) * g.h(0)), oy = -dt_ / (g.h(1) * g.h(1));
        for (int i = 1; i <= n; ++i) {
            for (int j = 1; j <= n; ++j) {
                const std::size_t k = g.flat(i, j);
                double s = diag_[k] * x[k];
                if (i > 1) s += ox * x[k - n];
                if (i < n) s += ox * x[k + n];
                if (j > 1) s += oy * x[k - 1];
                if (j < n) s += oy * x[k + 1];
                y[k] = s;
            }
        }
    }

    [[nodiscard]] ScalarField apply(const ScalarField& x) const {
        ScalarField y(grid_);
        apply(x.values(), y.values());
        return y;
    }

    [[nodiscard]] ScalarField solve(const ScalarField& rhs) const {
        ScalarField x(grid_);
        if (!diffusion_) {
            for (std::size_t k = 0; k < x.size(); ++k) x[k] = rhs[k] / diag_[k];
        } else if (grid_.dim() == 1) {
            tri_.solve(rhs.values(), x.values());
        } else if (solver_ == LinearSolver::direct) {
            chol_.solve(rhs.values(), x.values());
        } else {
            x = rhs;
            auto op = [this](std::span<const double> in, std::span<double> out) { apply(in, out); };
            last_cg_ = linalg::conjugate_gradient(op, diag_, rhs.values(), x.values(), cg_tol_,
                                                  10 * static_cast<int>(grid_.size()) + 100);
        }
        return x;
    }

    /// ||A x - b|| / ||b|| (0 when b = 0).
    [[nodiscard]] double relative_residual(const ScalarField& x, const ScalarField& rhs) const {
        const ScalarField ax = apply(x);
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < ax.size(); ++k) {
            num += (ax[k] - rhs[k]) * (ax[k] - rhs[k]);
            den += rhs[k] * rhs[k];
        }
        return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
    }

    [[nodiscard]] linalg::CgResult last_cg() const noexcept { return last_cg_; }

private:
    Grid grid_;
    double dt_;
    bool diffusion_;
    LinearSolver solver_;
    double cg_tol_;
    std::vector<double> diag_;
    linalg::Tridiagonal tri_;
    linalg::BandCholesky chol_;
    mutable linalg::CgResult last_cg_{};
};

namespace detail {

inline constexpr double kResidualLimit = 1e-10;

inline ScalarField imex_step(const ImplicitOperator& op, const ScalarField& u, double dt, const Nonlinearity& f) {
    ScalarField rhs = u;
    if (!f.is_zero())
        for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] += dt * f(u[k]);
    ScalarField next = op.solve(rhs);
    const double res = op.relative_residual(next, rhs);
    if (!(res <= kResidualLimit))
        throw NumericalError("imex step: linear solve residual " + std::to_string(res) + " above 1e-10");
    return next;
}

/// Lawson (integrating-factor) RK4 for u' = v u + f(u), node by node. Exact
/// when f = 0, so the reaction-only diagnostic reproduces exp(v t) u0.
inline ScalarField reaction_step(const ScalarField& v, const ScalarField& u, double dt, const Nonlinearity& f) {
    ScalarField out(u.grid());
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double e = std::exp(v[k] * dt), eh = std::exp(0.5 * v[k] * dt);
        const double x = u[k];
        if (f.is_zero()) {
            out[k] = e * x;
            continue;
        }
        const double k1 = f(x);
        const double k2 = f(eh * (x + 0.5 * dt * k1));
        const double k3 = f(eh * x + 0.5 * dt * k2);
        const double k4 = f(e * x + dt * eh * k3);
        out[k] = e * x + dt / 6.0 * (e * k1 + 2.0 * eh * (k2 + k3) + k4);
    }
    return out;
}

inline TraceRecord make_record(double t, const ScalarField& u, const Nonlinearity& f) {
    TraceRecord r;
    r.t = t;
    r.l2_u = l2_norm(u);
    r.linf_u = linf_norm(u);
    r.l2_f_u = f.is_zero() ? 0.0 : l2_norm(f(u));
    r.l2_lap_u = l2_norm(laplacian(u));
    r.min_u = u.min();
    return r;
}

/// Number of dt steps that lands on t, or -1 when t is not a multiple of dt.
inline long aligned_steps(double t, double dt) {
    const double q = t / dt;
    const double r = std::round(q);
    return std::abs(q - r) <= 1e-6 ? static_cast<long>(r) : -1;
}

}  // namespace detail

/// One IMEX step with a static control field.
inline ScalarField step_imex(const ScalarField& u, const ScalarField& v, double dt, const Nonlinearity& f,
                             const SolveOptions& opts = {}) {
    u.check_same(v);
    const Nonlinearity active = opts.reaction ? f : Nonlinearity::zero();
    if (!opts.diffusion) return detail::reaction_step(v, u, dt, active);
    const ImplicitOperator op(v, dt, true, opts.solver, opts.cg_tolerance);
    return detail::imex_step(op, u, dt, active);
}

/// Integrates the problem over [0, T] with fixed step dt. The control of each
/// step is the schedule's field at the step's right endpoint; breakpoints must
/// be integer multiples of dt.
inline SolveTrace solve(const ProblemSpec& problem, const ControlSchedule& schedule, double dt,
                        const SolveOptions& opts = {}) {
    problem.validate();
    if (!(dt > 0.0)) throw ConfigError("solve: dt must be positive");
    if (!(schedule.grid() == problem.grid)) throw ConfigError("solve: schedule is not on the problem grid");
    if (std::abs(schedule.horizon() - problem.horizon) > 1e-12 * problem.horizon)
        throw ConfigError("solve: schedule horizon " + format_double(schedule.horizon()) +
                          " differs from problem horizon " + format_double(problem.horizon));

    const auto& bp = schedule.breakpoints();
    std::vector<long> step_end(bp.size());
    for (std::size_t k = 0; k < bp.size(); ++k) {
        step_end[k] = detail::aligned_steps(bp[k], dt);
        if (step_end[k] < 0 || (k > 0 && step_end[k] <= step_end[k - 1]))
            throw AlignmentError("solve: breakpoint t_" + std::to_string(k) + " = " + format_double(bp[k]) +
                                 " is not a positive multiple of dt = " + format_double(dt) +
                                 " past the previous breakpoint");
    }

    const Nonlinearity active = opts.reaction ? problem.f : Nonlinearity::zero();
    if (opts.diffusion) {
        const GuardResult guard = stability_guard(dt, schedule.max_positive_part(), active);
        if (!guard.ok) throw StabilityError("solve: stability guard failed: " + guard.detail);
    }

    const long total = step_end.back();
    SolveTrace trace;
    trace.grid = problem.grid;
    trace.f = active;
    trace.dt = dt;
    trace.all_states = opts.keep_states;
    trace.times.reserve(static_cast<std::size_t>(total) + 1);
    trace.records.reserve(static_cast<std::size_t>(total) + 1);
    if (opts.keep_states) trace.states.reserve(static_cast<std::size_t>(total) + 1);

    ScalarField u = problem.u0;
    trace.times.push_back(0.0);
    trace.records.push_back(detail::make_record(0.0, u, active));
    trace.states.push_back(u);

    long j = 0;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        const ScalarField& v = schedule.step(k);
        std::optional<ImplicitOperator> op;
        if (opts.diffusion) op.emplace(v, dt, true, opts.solver, opts.cg_tolerance);
        for (; j < step_end[k + 1]; ++j) {
            u = opts.diffusion ? detail::imex_step(*op, u, dt, active) : detail::reaction_step(v, u, dt, active);
            const double t = (j + 1 == total) ? problem.horizon : (j + 1) * dt;
            trace.times.push_back(t);
            trace.records.push_back(detail::make_record(t, u, active));
            if (opts.keep_states) trace.states.push_back(u);
        }
    }
    if (!opts.keep_states) trace.states.push_back(u);
    return trace;
}

/// Like solve, but step k of the schedule advances with its own dt_k. Each
/// piece is an ordinary solve; the pieces are stitched into one trace whose
/// dt field holds the smallest step used.
inline SolveTrace solve_piecewise(const ProblemSpec& problem, const ControlSchedule& schedule,
                                  std::span<const double> step_dt, const SolveOptions& opts = {}) {
    problem.validate();
    if (step_dt.size() != schedule.size()) throw ConfigError("solve_piecewise: need one dt per schedule step");
    if (std::abs(schedule.horizon() - problem.horizon) > 1e-12 * problem.horizon)
        throw ConfigError("solve_piecewise: schedule horizon differs from problem horizon");
    const auto& bp = schedule.breakpoints();
    SolveTrace out;
    out.grid = problem.grid;
    out.f = opts.reaction ? problem.f : Nonlinearity::zero();
    out.dt = *std::min_element(step_dt.begin(), step_dt.end());
    out.all_states = opts.keep_states;
    ScalarField u = problem.u0;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        const double len = bp[k + 1] - bp[k];
        const ProblemSpec piece{problem.grid, problem.f, u, len};
        SolveTrace tr;
        try {
            tr = solve(piece, ControlSchedule::constant(schedule.step(k), len), step_dt[k], opts);
        } catch (const AlignmentError&) {
            throw AlignmentError("solve_piecewise: step " + std::to_string(k) + " of length " + format_double(len) +
                                 " is not a multiple of its dt = " + format_double(step_dt[k]));
        }
        const std::size_t first = k == 0 ? 0 : 1;
        for (std::size_t j = first; j < tr.times.size(); ++j) {
            const double t = (j + 1 == tr.times.size()) ? bp[k + 1] : bp[k] + tr.times[j];
            out.times.push_back(t);
            out.records.push_back(tr.records[j]);
            out.records.back().t = t;
        }
        if (opts.keep_states) {
            out.states.insert(out.states.end(), tr.states.begin() + static_cast<std::ptrdiff_t>(first),
                              tr.states.end());
        } else if (k == 0) {
            out.states.push_back(tr.states.front());
        }
        u = tr.final_state();
    }
    if (!opts.keep_states) out.states.push_back(u);
    return out;
}

/// Columns t, l2_u, linf_u, l2_f_u, l2_lap_u.
inline void write_trace_csv(std::ostream& os, const SolveTrace& trace) {
    os << "t,l2_u,linf_u,l2_f_u,l2_lap_u\n";
    for (const auto& r : trace.records) {
        os << format_double(r.t) << ',' << format_double(r.l2_u) << ',' << format_double(r.linf_u) << ','
           << format_double(r.l2_f_u) << ',' << format_double(r.l2_lap_u) << '\n';
    }
}

}  // namespace mctl
