// Small dense-banded linear algebra for the implicit diffusion-reaction
// operator. Every matrix here is a symmetric M-matrix (positive diagonal,
// nonpositive off-diagonals, diagonally dominant), which the factorizations
// below exploit: the computed factors keep the sign pattern exactly, so a
// nonnegative right-hand side yields a nonnegative solution in floating point.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mctl/error.hpp"

namespace mctl::linalg {

/// Thomas elimination for a tridiagonal matrix with a constant symmetric
/// off-diagonal. Factor once, solve many times.
class Tridiagonal {
public:
    Tridiagonal() = default;

    Tridiagonal(std::vector<double> diag, double off) : off_(off), cp_(diag.size()), denom_(diag.size()) {
        const std::size_t n = diag.size();
        if (n == 0) throw NumericalError("tridiagonal: empty system");
        for (std::size_t i = 0; i < n; ++i) {
            const double d = diag[i] - (i > 0 ? off * cp_[i - 1] : 0.0);
            if (!(d > 0.0)) throw NumericalError("tridiagonal: nonpositive pivot at row " + std::to_string(i));
            denom_[i] = d;
            cp_[i] = off / d;
        }
    }

    void solve(std::span<const double> rhs, std::span<double> x) const {
        const std::size_t n = denom_.size();
        std::vector<double> dp(n);
        for (std::size_t i = 0; i < n; ++i) dp[i] = (rhs[i] - (i > 0 ? off_ * dp[i - 1] : 0.0)) / denom_[i];
        x[n - 1] = dp[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp_[i] * x[i + 1];
    }

private:
    double off_ = 0.0;
    std::vector<double> cp_;
    std::vector<double> denom_;
};

/// Symmetric positive-definite band matrix, lower band stored row-wise:
/// entry (r, c) with r - bandwidth <= c <= r lives at band(r, r - c).
class BandMatrix {
public:
    BandMatrix(std::size_t n, std::size_t bandwidth) : n_(n), b_(bandwidth), data_(n * (bandwidth + 1), 0.0) {}

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::size_t bandwidth() const noexcept { return b_; }

    /// Lower-triangle access; requires r >= c and r - c <= bandwidth.
    double& at(std::size_t r, std::size_t c) { return data_[r * (b_ + 1) + (r - c)]; }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data_[r * (b_ + 1) + (r - c)]; }

private:
    std::size_t n_;
    std::size_t b_;
    std::vector<double> data_;
};

/// In-band Cholesky A = L L^T. Cost O(n b^2) to factor, O(n b) per solve.
class BandCholesky {
public:
    BandCholesky() = default;

    explicit BandCholesky(BandMatrix a) : l_(std::move(a)) {
        const std::size_t n = l_.size(), b = l_.bandwidth();
        for (std::size_t r = 0; r < n; ++r) {
            const std::size_t c0 = r >= b ? r - b : 0;
            for (std::size_t c = c0; c < r; ++c) {
                double s = l_.at(r, c);
                for (std::size_t m = c0; m < c; ++m) s -= l_.at(r, m) * l_.at(c, m);
                l_.at(r, c) = s / l_.at(c, c);
            }
            double d = l_.at(r, r);
            for (std::size_t m = c0; m < r; ++m) d -= l_.at(r, m) * l_.at(r, m);
            if (!(d > 0.0)) throw NumericalError("band cholesky: matrix not positive definite at row " + std::to_string(r));
            l_.at(r, r) = std::sqrt(d);
        }
    }

    void solve(std::span<const double> rhs, std::span<double> x) const {
        const std::size_t n = l_.size(), b = l_.bandwidth();
        std::vector<double> y(n);
        for (std::size_t r = 0; r < n; ++r) {
            double s = rhs[r];
            const std::size_t c0 = r >= b ? r - b : 0;
            for (std::size_t c = c0; c < r; ++c) s -= l_.at(r, c) * y[c];
            y[r] = s / l_.at(r, r);
        }
        for (std::size_t r = n; r-- > 0;) {
            double s = y[r];
            const std::size_t rmax = std::min(n - 1, r + b);
            for (std::size_t k = r + 1; k <= rmax; ++k) s -= l_.at(k, r) * x[k];
            x[r] = s / l_.at(r, r);
        }
    }

private:
    BandMatrix l_{0, 0};
};

struct CgResult {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients on an SPD operator.
inline CgResult conjugate_gradient(const std::function<void(std::span<const double>, std::span<double>)>& apply,
                                   std::span<const double> diag, std::span<const double> rhs, std::span<double> x,
                                   double rtol, int max_iter) {
    const std::size_t n = rhs.size();
    std::vector<double> r(n), z(n), p(n), ap(n);
    apply(x, ap);
    double rhs_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = rhs[i] - ap[i];
        rhs_norm += rhs[i] * rhs[i];
    }
    rhs_norm = std::sqrt(rhs_norm);
    if (rhs_norm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return {0, 0.0};
    }
    auto norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s += e * e;
        return std::sqrt(s);
    };
    double rel = norm(r) / rhs_norm;
    if (rel <= rtol) return {0, rel};
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] = r[i] / diag[i];
    double rz = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];
    for (int it = 1; it <= max_iter; ++it) {
        apply(p, ap);
        double pap = 0.0;
        for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
        if (!(pap > 0.0)) throw NumericalError("conjugate gradient: operator not positive definite");
        const double alpha = rz / pap;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm(r) / rhs_norm;
        if (rel <= rtol) return {it, rel};
        double rz_new = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = r[i] / diag[i];
            rz_new += r[i] * z[i];
        }
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw NumericalError("conjugate gradient: no convergence in " + std::to_string(max_iter) +
                         " iterations (relative residual " + std::to_string(rel) + ")");
}

}  // namespace mctl::linalg
