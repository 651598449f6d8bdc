#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>

#include "mctl/error.hpp"
#include "mctl/field.hpp"

namespace mctl {

/// Reaction term f with f(0) = 0 and Lipschitz constant L.
class Nonlinearity {
public:
    enum class Kind { zero, linear, scaled_sine, saturating };

    Nonlinearity() = default;

    static Nonlinearity zero(double lipschitz = 0.0) { return {Kind::zero, lipschitz, 0.0}; }

    /// f(u) = c u. L defaults to |c|.
    static Nonlinearity linear(double c) { return {Kind::linear, std::abs(c), c}; }
    static Nonlinearity linear(double c, double lipschitz) {
        if (std::abs(c) > lipschitz) throw ConfigError("nonlinearity: linear needs |c| <= L");
        return {Kind::linear, lipschitz, c};
    }

    /// f(u) = L sin(u)
    static Nonlinearity scaled_sine(double lipschitz) { return {Kind::scaled_sine, lipschitz, 0.0}; }

    /// f(u) = L u / (1 + u^2); slope is largest (= L) at the origin.
    static Nonlinearity saturating(double lipschitz) { return {Kind::saturating, lipschitz, 0.0}; }

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] double lipschitz() const noexcept { return lipschitz_; }
    [[nodiscard]] double coefficient() const noexcept { return c_; }
    [[nodiscard]] bool is_zero() const noexcept { return kind_ == Kind::zero; }

    [[nodiscard]] double operator()(double u) const noexcept {
        switch (kind_) {
            case Kind::zero: return 0.0;
            case Kind::linear: return c_ * u;
            case Kind::scaled_sine: return lipschitz_ * std::sin(u);
            case Kind::saturating: return lipschitz_ * u / (1.0 + u * u);
        }
        return 0.0;
    }

    [[nodiscard]] ScalarField operator()(const ScalarField& u) const {
        return u.map([this](double v) { return (*this)(v); });
    }

    [[nodiscard]] std::string_view name() const noexcept { return kind_name(kind_); }

    static std::string_view kind_name(Kind k) noexcept {
        switch (k) {
            case Kind::zero: return "zero";
            case Kind::linear: return "linear";
            case Kind::scaled_sine: return "scaled_sine";
            case Kind::saturating: return "saturating";
        }
        return "?";
    }

private:
    Nonlinearity(Kind k, double lipschitz, double c) : kind_(k), lipschitz_(lipschitz), c_(c) {
        if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz))
            throw ConfigError("nonlinearity: Lipschitz constant must be finite and nonnegative");
    }

    Kind kind_ = Kind::zero;
    double lipschitz_ = 0.0;
    double c_ = 0.0;
};

/// Pairwise sampling check of |f(a) - f(b)| <= L |a - b| and f(0) = 0.
template <class F>
bool lipschitz_selfcheck(const F& f, double lipschitz, std::span<const double> samples) {
    if (samples.empty()) throw ConfigError("lipschitz_selfcheck: no samples");
    if (f(0.0) != 0.0) return false;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double fa = f(samples[i]);
        for (std::size_t j = i + 1; j < samples.size(); ++j) {
            const double diff = std::abs(fa - f(samples[j]));
            if (diff > lipschitz * std::abs(samples[i] - samples[j]) * (1.0 + 1e-12)) return false;
        }
    }
    return true;
}

inline bool lipschitz_selfcheck(const Nonlinearity& f, std::span<const double> samples) {
    return lipschitz_selfcheck([&f](double u) { return f(u); }, f.lipschitz(), samples);
}

}  // namespace mctl
