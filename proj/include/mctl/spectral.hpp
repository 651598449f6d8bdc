// Dirichlet sine eigenbasis on (0, l): lambda_k = (k pi / l)^2,
// phi_k(x) = sqrt(2 / l) sin(k pi x / l). Under the rectangle rule on the
// interior nodes, phi_1..phi_n are exactly orthonormal, so projection,
// reconstruction and Parseval hold to rounding on the grid.
//
// Used as an independent oracle for the finite-difference solver when the
// control is constant in space: each mode evolves by exp((v - lambda_k) t),
// and the reaction enters through the Duhamel term
//
//   F(T1) = sum_k [ int_0^T1 exp((v - lambda_k)(T1 - t)) <f(u(t)), phi_k> dt ] phi_k.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <utility>
#include <vector>

#include "mctl/dynamics.hpp"
#include "mctl/error.hpp"
#include "mctl/field.hpp"
#include "mctl/field_io.hpp"

namespace mctl::spectral {

struct ModalCoeffs {
    double length = 1.0;
    /// c[k - 1] is the coefficient of mode k.
    std::vector<double> c;

    [[nodiscard]] std::size_t order() const noexcept { return c.size(); }
};

namespace detail {

inline void require_1d(const Grid& g, const char* what) {
    if (g.dim() != 1) throw ConfigError(std::string(what) + ": the sine oracle is 1D only");
}

}  // namespace detail

inline double eigenvalue(int k, double length = 1.0) {
    if (k < 1) throw ConfigError("eigenvalue: mode index must be >= 1");
    const double w = k * std::numbers::pi / length;
    return w * w;
}

/// Eigenvalue of the 3-point discrete Laplacian for the same mode.
inline double discrete_eigenvalue(int k, const Grid& g) {
    detail::require_1d(g, "discrete_eigenvalue");
    const double h = g.h(0);
    return (2.0 - 2.0 * std::cos(k * std::numbers::pi * h / g.length(0))) / (h * h);
}

inline ScalarField eigenfunction(int k, const Grid& g) {
    detail::require_1d(g, "eigenfunction");
    if (k < 1) throw ConfigError("eigenfunction: mode index must be >= 1");
    const double l = g.length(0);
    const double a = std::sqrt(2.0 / l);
    return ScalarField::sample(g, [&](double x) { return a * std::sin(k * std::numbers::pi * x / l); });
}

inline std::pair<double, ScalarField> eigenpair(int k, const Grid& g) {
    return {eigenvalue(k, g.length(0)), eigenfunction(k, g)};
}

inline ModalCoeffs project(const ScalarField& u, int order) {
    const Grid& g = u.grid();
    detail::require_1d(g, "project");
    if (order < 1 || order > g.n()) throw ConfigError("project: order must lie in [1, n]");
    ModalCoeffs out{g.length(0), std::vector<double>(static_cast<std::size_t>(order))};
    for (int k = 1; k <= order; ++k) out.c[k - 1] = inner(u, eigenfunction(k, g));
    return out;
}

inline ScalarField reconstruct(const ModalCoeffs& m, const Grid& g) {
    detail::require_1d(g, "reconstruct");
    ScalarField out(g);
    for (std::size_t k = 1; k <= m.order(); ++k) {
        if (m.c[k - 1] == 0.0) continue;
        out += m.c[k - 1] * eigenfunction(static_cast<int>(k), g);
    }
    return out;
}

/// c_k -> exp((v - lambda_k) t) c_k
inline ModalCoeffs evolve_const_v(const ModalCoeffs& m, double v, double t) {
    if (t < 0.0) throw ConfigError("evolve_const_v: t must be nonnegative");
    ModalCoeffs out = m;
    for (std::size_t k = 1; k <= m.order(); ++k)
        out.c[k - 1] *= std::exp((v - eigenvalue(static_cast<int>(k), m.length)) * t);
    return out;
}

namespace detail {

/// Trapezoid weights on the trace's time nodes.
inline std::vector<double> trapezoid_weights(const std::vector<double>& t) {
    std::vector<double> w(t.size(), 0.0);
    for (std::size_t j = 1; j < t.size(); ++j) {
        const double d = t[j] - t[j - 1];
        w[j - 1] += 0.5 * d;
        w[j] += 0.5 * d;
    }
    return w;
}

inline void require_horizon(const SolveTrace& trace, double t1, const char* what) {
    if (std::abs(trace.horizon() - t1) > 1e-12 * std::max(1.0, t1))
        throw ConfigError(std::string(what) + ": trace horizon differs from T1");
}

}  // namespace detail

/// Duhamel term of the reaction, truncated to `order` modes, with trapezoid
/// quadrature over the trace's time nodes.
inline ScalarField f_term(const SolveTrace& trace, double v, double t1, int order) {
    detail::require_1d(trace.grid, "f_term");
    detail::require_horizon(trace, t1, "f_term");
    const Grid& g = trace.grid;
    if (order < 1 || order > g.n()) throw ConfigError("f_term: order must lie in [1, n]");
    if (trace.f.is_zero()) return ScalarField(g);
    const auto w = detail::trapezoid_weights(trace.times);
    std::vector<ScalarField> modes;
    modes.reserve(static_cast<std::size_t>(order));
    for (int k = 1; k <= order; ++k) modes.push_back(eigenfunction(k, g));
    ModalCoeffs acc{g.length(0), std::vector<double>(static_cast<std::size_t>(order), 0.0)};
    for (std::size_t j = 0; j < trace.times.size(); ++j) {
        if (w[j] == 0.0) continue;
        const ScalarField fu = trace.f(trace.state(j));
        for (int k = 1; k <= order; ++k) {
            const double decay = std::exp((v - eigenvalue(k, g.length(0))) * (t1 - trace.times[j]));
            acc.c[k - 1] += w[j] * decay * inner(fu, modes[k - 1]);
        }
    }
    return reconstruct(acc, g);
}

/// sqrt(M^2 T1 int_0^T1 ||f(u)||^2 dt), same quadrature as f_term, which makes
/// ||f_term|| <= this bound hold exactly on the discrete level.
inline double f_term_bound(const SolveTrace& trace, double amplification, double t1, double v) {
    detail::require_horizon(trace, t1, "f_term_bound");
    if (v < 0.0) throw PreconditionError("f_term_bound: needs v1 >= 0");
    if (std::abs(std::exp(v * t1) - amplification) > 1e-9 * amplification)
        throw PreconditionError("f_term_bound: exp(v1 T1) does not match M");
    const auto w = detail::trapezoid_weights(trace.times);
    double integral = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) integral += w[j] * trace.records[j].l2_f_u * trace.records[j].l2_f_u;
    return std::sqrt(amplification * amplification * t1 * integral);
}

/// Columns k, lambda_k, c_k.
inline void write_modes_csv(std::ostream& os, const ModalCoeffs& m) {
    os << "k,lambda_k,c_k\n";
    for (std::size_t k = 1; k <= m.order(); ++k)
        os << k << ',' << format_double(eigenvalue(static_cast<int>(k), m.length)) << ','
           << format_double(m.c[k - 1]) << '\n';
}

}  // namespace mctl::spectral
