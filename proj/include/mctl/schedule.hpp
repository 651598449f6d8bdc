#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mctl/error.hpp"
#include "mctl/field.hpp"

namespace mctl {

/// Piecewise-static control: m static fields v_1..v_m on the breakpoints
/// 0 = t_0 < t_1 < ... < t_m = T. v_1 owns the closed interval [t_0, t_1],
/// v_k (k >= 2) owns (t_{k-1}, t_k].
class ControlSchedule {
public:
    ControlSchedule() = default;

    ControlSchedule(std::vector<double> breakpoints, std::vector<ScalarField> steps)
        : breakpoints_(std::move(breakpoints)), steps_(std::move(steps)) {
        if (steps_.empty()) throw ConfigError("schedule: needs at least one step");
        if (breakpoints_.size() != steps_.size() + 1)
            throw ConfigError("schedule: need m + 1 breakpoints for m steps");
        if (breakpoints_.front() != 0.0) throw ConfigError("schedule: first breakpoint must be 0");
        for (std::size_t k = 1; k < breakpoints_.size(); ++k) {
            if (!(breakpoints_[k] > breakpoints_[k - 1]) || !std::isfinite(breakpoints_[k]))
                throw ConfigError("schedule: breakpoints must be strictly increasing (index " +
                                  std::to_string(k) + ")");
        }
        for (const auto& s : steps_) steps_.front().check_same(s);
    }

    /// Single static field over [0, T].
    static ControlSchedule constant(ScalarField v, double horizon) {
        return ControlSchedule({0.0, horizon}, {std::move(v)});
    }

    static ControlSchedule constant(const Grid& g, double value, double horizon) {
        return constant(ScalarField(g, value), horizon);
    }

    [[nodiscard]] std::size_t size() const noexcept { return steps_.size(); }
    [[nodiscard]] double horizon() const noexcept { return breakpoints_.back(); }
    [[nodiscard]] const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    [[nodiscard]] const std::vector<ScalarField>& steps() const noexcept { return steps_; }
    [[nodiscard]] const ScalarField& step(std::size_t k) const { return steps_.at(k); }
    [[nodiscard]] const Grid& grid() const { return steps_.front().grid(); }

    /// 0-based index of the step active at time t.
    [[nodiscard]] std::size_t step_index_at(double t) const {
        if (!(t >= 0.0) || t > horizon())
            throw ConfigError("control_at: t = " + std::to_string(t) + " outside [0, " +
                              std::to_string(horizon()) + "]");
        const auto it = std::lower_bound(breakpoints_.begin() + 1, breakpoints_.end(), t);
        return static_cast<std::size_t>(it - (breakpoints_.begin() + 1));
    }

    [[nodiscard]] const ScalarField& control_at(double t) const { return steps_[step_index_at(t)]; }

    /// Largest positive part over all steps, max_k ||v_k^+||_inf.
    [[nodiscard]] double max_positive_part() const {
        double m = 0.0;
        for (const auto& s : steps_) m = std::max(m, std::max(s.max(), 0.0));
        return m;
    }

    /// Appends `next` after this schedule, shifting its breakpoints by horizon().
    [[nodiscard]] ControlSchedule then(const ControlSchedule& next) const {
        auto bp = breakpoints_;
        auto st = steps_;
        const double shift = horizon();
        for (std::size_t k = 1; k < next.breakpoints_.size(); ++k) bp.push_back(shift + next.breakpoints_[k]);
        st.insert(st.end(), next.steps_.begin(), next.steps_.end());
        return ControlSchedule(std::move(bp), std::move(st));
    }

private:
    std::vector<double> breakpoints_;
    std::vector<ScalarField> steps_;
};

inline const ScalarField& control_at(const ControlSchedule& s, double t) { return s.control_at(t); }

}  // namespace mctl
