// Uniform rectangular grids on intervals and rectangles, grid-sampled scalar
// fields with an implicit Dirichlet-zero boundary, and the discrete calculus
// used everywhere else: rectangle-rule norms, the 5-point Laplacian, the H1_0
// norm, boundary distance, cutoffs and Gaussian mollification.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "mctl/error.hpp"

namespace mctl {

class Grid {
public:
    Grid() = default;

    Grid(int dim, int n, std::array<double, 2> lengths) : dim_(dim), n_(n), lengths_(lengths) {
        if (dim != 1 && dim != 2) throw ConfigError("grid: dim must be 1 or 2, got " + std::to_string(dim));
        if (n < 3) throw ConfigError("grid: need at least 3 interior points per axis, got " + std::to_string(n));
        for (int a = 0; a < dim; ++a) {
            if (!(lengths[a] > 0.0) || !std::isfinite(lengths[a]))
                throw ConfigError("grid: axis length must be positive");
        }
        if (dim == 1) lengths_[1] = 0.0;
    }

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] double length(int axis) const noexcept { return lengths_[axis]; }
    [[nodiscard]] double h(int axis) const noexcept { return lengths_[axis] / (n_ + 1); }
    [[nodiscard]] double min_h() const noexcept { return dim_ == 1 ? h(0) : std::min(h(0), h(1)); }
    [[nodiscard]] double min_length() const noexcept {
        return dim_ == 1 ? lengths_[0] : std::min(lengths_[0], lengths_[1]);
    }

    [[nodiscard]] std::size_t size() const noexcept {
        return dim_ == 1 ? static_cast<std::size_t>(n_) : static_cast<std::size_t>(n_) * n_;
    }

    /// Quadrature weight of one node: product of the spacings.
    [[nodiscard]] double cell_volume() const noexcept { return dim_ == 1 ? h(0) : h(0) * h(1); }

    /// Coordinate of interior node i (1-based, i = 1..n) along an axis.
    [[nodiscard]] double coord(int axis, int i) const noexcept { return i * h(axis); }

    /// Row-major flat index; axis 0 varies slowest. Indices are 1-based.
    [[nodiscard]] std::size_t flat(int i, int j = 1) const noexcept {
        return dim_ == 1 ? static_cast<std::size_t>(i - 1)
                         : static_cast<std::size_t>(i - 1) * n_ + static_cast<std::size_t>(j - 1);
    }

    /// Inverse of flat(): 1-based (i, j); j is 1 in 1D.
    [[nodiscard]] std::array<int, 2> index(std::size_t k) const noexcept {
        if (dim_ == 1) return {static_cast<int>(k) + 1, 1};
        return {static_cast<int>(k / n_) + 1, static_cast<int>(k % n_) + 1};
    }

    [[nodiscard]] std::array<double, 2> point(std::size_t k) const noexcept {
        const auto [i, j] = index(k);
        return {coord(0, i), dim_ == 2 ? coord(1, j) : 0.0};
    }

    friend bool operator==(const Grid& a, const Grid& b) noexcept {
        return a.dim_ == b.dim_ && a.n_ == b.n_ && a.lengths_ == b.lengths_;
    }

private:
    int dim_ = 1;
    int n_ = 3;
    std::array<double, 2> lengths_{1.0, 0.0};
};

inline Grid make_grid(int dim, int n, std::span<const double> lengths) {
    if (static_cast<int>(lengths.size()) != dim)
        throw ConfigError("grid: expected " + std::to_string(dim) + " axis lengths, got " +
                          std::to_string(lengths.size()));
    std::array<double, 2> l{lengths[0], dim == 2 ? lengths[1] : 0.0};
    return Grid(dim, n, l);
}

inline Grid make_grid(int dim, int n, std::initializer_list<double> lengths) {
    return make_grid(dim, n, std::span<const double>(lengths.begin(), lengths.size()));
}

/// Values at the interior nodes of a grid. Boundary nodes are implicit zeros.
class ScalarField {
public:
    ScalarField() = default;

    explicit ScalarField(Grid grid, double fill = 0.0) : grid_(grid), values_(grid.size(), fill) {}

    ScalarField(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            throw ConfigError("field: expected " + std::to_string(grid_.size()) + " values, got " +
                              std::to_string(values_.size()));
        for (double v : values_)
            if (!std::isfinite(v)) throw NumericalError("field: non-finite value");
    }

    template <class Fn>
    static ScalarField sample(const Grid& grid, Fn&& fn) {
        ScalarField out(grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const auto p = grid.point(k);
            if constexpr (std::is_invocable_v<Fn, double, double>)
                out.values_[k] = fn(p[0], p[1]);
            else
                out.values_[k] = fn(p[0]);
        }
        return out;
    }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }
    [[nodiscard]] double operator[](std::size_t k) const noexcept { return values_[k]; }
    [[nodiscard]] double& operator[](std::size_t k) noexcept { return values_[k]; }

    [[nodiscard]] double min() const { return *std::min_element(values_.begin(), values_.end()); }
    [[nodiscard]] double max() const { return *std::max_element(values_.begin(), values_.end()); }

    template <class Fn>
    [[nodiscard]] ScalarField map(Fn&& fn) const {
        ScalarField out(grid_);
        std::transform(values_.begin(), values_.end(), out.values_.begin(), fn);
        return out;
    }

    ScalarField& operator+=(const ScalarField& o) {
        check_same(o);
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        check_same(o);
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
        return *this;
    }
    ScalarField& operator*=(double s) noexcept {
        for (double& v : values_) v *= s;
        return *this;
    }

    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(ScalarField a, double s) { return a *= s; }
    friend ScalarField operator*(double s, ScalarField a) { return a *= s; }

    /// Pointwise product.
    [[nodiscard]] ScalarField times(const ScalarField& o) const {
        check_same(o);
        ScalarField out(grid_);
        for (std::size_t k = 0; k < values_.size(); ++k) out.values_[k] = values_[k] * o.values_[k];
        return out;
    }

    void check_same(const ScalarField& o) const {
        if (!(grid_ == o.grid_)) throw ConfigError("field: grid mismatch");
    }

private:
    Grid grid_;
    std::vector<double> values_;
};

// Norms and inner product (rectangle rule over interior nodes) ---------------

inline double inner(const ScalarField& a, const ScalarField& b) {
    a.check_same(b);
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s * a.grid().cell_volume();
}

inline double l2_norm(const ScalarField& u) {
    double s = 0.0;
    for (double v : u.values()) s += v * v;
    return std::sqrt(s * u.grid().cell_volume());
}

inline double linf_norm(const ScalarField& u) {
    double m = 0.0;
    for (double v : u.values()) m = std::max(m, std::abs(v));
    return m;
}

inline double l2_distance(const ScalarField& a, const ScalarField& b) { return l2_norm(a - b); }

inline ScalarField positive_part(const ScalarField& u) {
    return u.map([](double v) { return std::max(v, 0.0); });
}

// Finite differences ---------------------------------------------------------

/// How ghost values outside the interior are produced for the stencil.
enum class Ghost {
    /// State fields: the boundary carries zero.
    dirichlet_zero,
    /// Coefficient fields (controls): quadratic extrapolation, so the stencil
    /// is exact on quadratics and vanishes on constants up to the boundary.
    extrapolate,
};

namespace detail {

inline double ghost_value(double u1, double u2, double u3, Ghost g) noexcept {
    return g == Ghost::dirichlet_zero ? 0.0 : 3.0 * u1 - 3.0 * u2 + u3;
}

}  // namespace detail

inline ScalarField laplacian(const ScalarField& u, Ghost ghost = Ghost::dirichlet_zero) {
    const Grid& g = u.grid();
    const int n = g.n();
    ScalarField out(g);
    auto at = [&](int i, int j) { return u[g.flat(i, j)]; };
    for (int axis = 0; axis < g.dim(); ++axis) {
        const double inv_h2 = 1.0 / (g.h(axis) * g.h(axis));
        const int jmax = g.dim() == 2 ? n : 1;
        for (int j = 1; j <= jmax; ++j) {
            // Walk one line along `axis`; `line(i)` reads the i-th node on it.
            auto line = [&](int i) { return axis == 0 ? at(i, j) : at(j, i); };
            const double lo = detail::ghost_value(line(1), line(2), line(3), ghost);
            const double hi = detail::ghost_value(line(n), line(n - 1), line(n - 2), ghost);
            for (int i = 1; i <= n; ++i) {
                const double left = i == 1 ? lo : line(i - 1);
                const double right = i == n ? hi : line(i + 1);
                const std::size_t k = axis == 0 ? g.flat(i, j) : g.flat(j, i);
                out[k] += (left - 2.0 * line(i) + right) * inv_h2;
            }
        }
    }
    return out;
}

/// Squared L2 norm of the forward-difference gradient, faces to the boundary
/// included (boundary values are zero).
inline double gradient_norm_squared(const ScalarField& u) {
    const Grid& g = u.grid();
    const int n = g.n();
    double total = 0.0;
    for (int axis = 0; axis < g.dim(); ++axis) {
        const double h = g.h(axis);
        const int jmax = g.dim() == 2 ? n : 1;
        double s = 0.0;
        for (int j = 1; j <= jmax; ++j) {
            auto line = [&](int i) {
                if (i < 1 || i > n) return 0.0;
                return axis == 0 ? u[g.flat(i, j)] : u[g.flat(j, i)];
            };
            for (int i = 0; i <= n; ++i) {
                const double d = (line(i + 1) - line(i)) / h;
                s += d * d;
            }
        }
        total += s;
    }
    return total * g.cell_volume();
}

inline double h10_norm(const ScalarField& u) {
    const double l2 = l2_norm(u);
    return std::sqrt(l2 * l2 + gradient_norm_squared(u));
}

// Geometry -------------------------------------------------------------------

inline ScalarField boundary_distance(const Grid& g) {
    ScalarField out(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto p = g.point(k);
        double d = std::min(p[0], g.length(0) - p[0]);
        if (g.dim() == 2) d = std::min({d, p[1], g.length(1) - p[1]});
        out[k] = d;
    }
    return out;
}

/// Quintic smoothstep s^3 (6 s^2 - 15 s + 10), clamped to [0, 1].
inline double smoothstep5(double s) noexcept {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return std::min(1.0, s * s * s * (s * (6.0 * s - 15.0) + 10.0));
}

/// Blend value for a node at distance `dist`: 0 up to eta/2, 1 from eta on.
inline double cutoff_value(double dist, double eta) noexcept {
    const double half = 0.5 * eta;
    return smoothstep5((dist - half) / half);
}

inline ScalarField cutoff(const Grid& g, double eta) {
    if (!(eta > 0.0) || !(eta < 0.5 * g.min_length()))
        throw ConfigError("cutoff: eta must lie in (0, half the smallest axis length)");
    return boundary_distance(g).map([eta](double d) { return cutoff_value(d, eta); });
}

// Mollification --------------------------------------------------------------

namespace detail {

/// Normalised 1D Gaussian weights for offsets -r..r, truncated at 4 sigma.
inline std::vector<double> gaussian_kernel(double sigma, double h) {
    const int r = static_cast<int>(std::floor(4.0 * sigma / h));
    std::vector<double> w(2 * r + 1);
    double mass = 0.0;
    for (int o = -r; o <= r; ++o) {
        const double x = o * h;
        w[o + r] = std::exp(-x * x / (2.0 * sigma * sigma));
        mass += w[o + r];
    }
    for (double& v : w) v /= mass;
    return w;
}

}  // namespace detail

/// Separable truncated Gaussian smoothing; nodes outside the domain read zero.
inline ScalarField mollify(const ScalarField& u, double sigma) {
    if (sigma < 0.0 || !std::isfinite(sigma)) throw ConfigError("mollify: sigma must be nonnegative");
    if (sigma == 0.0) return u;
    const Grid& g = u.grid();
    const int n = g.n();
    ScalarField cur = u;
    for (int axis = 0; axis < g.dim(); ++axis) {
        const auto w = detail::gaussian_kernel(sigma, g.h(axis));
        const int r = static_cast<int>(w.size() / 2);
        if (r == 0) continue;
        ScalarField next(g);
        const int jmax = g.dim() == 2 ? n : 1;
        for (int j = 1; j <= jmax; ++j) {
            auto idx = [&](int i) { return axis == 0 ? g.flat(i, j) : g.flat(j, i); };
            for (int i = 1; i <= n; ++i) {
                double s = 0.0;
                const int lo = std::max(1, i - r);
                const int hi = std::min(n, i + r);
                for (int m = lo; m <= hi; ++m) s += w[m - i + r] * cur[idx(m)];
                next[idx(i)] = s;
            }
        }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace mctl
