#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "mctl/dynamics.hpp"

using namespace mctl;

namespace {

constexpr double kPi = std::numbers::pi;

ScalarField sine(const Grid& g) {
    return ScalarField::sample(g, [](double x) { return std::sin(kPi * x); });
}

ProblemSpec problem(const Grid& g, Nonlinearity f, ScalarField u0, double T) { return {g, f, std::move(u0), T}; }

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace

TEST(Schedule, ClosedFirstIntervalHalfOpenRest) {
    const Grid g = make_grid(1, 3, {1.0});
    const ControlSchedule s({0.0, 0.5, 1.0}, {ScalarField(g, 1.0), ScalarField(g, 2.0)});
    EXPECT_EQ(control_at(s, 0.0)[0], 1.0);
    EXPECT_EQ(control_at(s, 0.5)[0], 1.0);
    EXPECT_EQ(control_at(s, 0.5000001)[0], 2.0);
    EXPECT_EQ(control_at(s, 0.75)[0], 2.0);
    EXPECT_EQ(control_at(s, 1.0)[0], 2.0);
    EXPECT_THROW(control_at(s, -0.1), ConfigError);
    EXPECT_THROW(control_at(s, 1.1), ConfigError);
}

TEST(Schedule, RejectsMalformedBreakpoints) {
    const Grid g = make_grid(1, 3, {1.0});
    const ScalarField v(g);
    EXPECT_THROW(ControlSchedule({0.0, 0.5, 0.5}, {v, v}), ConfigError);
    EXPECT_THROW(ControlSchedule({0.1, 0.5}, {v}), ConfigError);
    EXPECT_THROW(ControlSchedule({0.0, 0.5}, {v, v}), ConfigError);
    EXPECT_THROW(ControlSchedule({0.0, 1.0}, {}), ConfigError);
}

TEST(Schedule, ThenShiftsBreakpoints) {
    const Grid g = make_grid(1, 3, {1.0});
    const auto s = ControlSchedule::constant(g, -1.0, 0.3).then(ControlSchedule::constant(g, 4.0, 0.2));
    ASSERT_EQ(s.size(), 2u);
    EXPECT_NEAR(s.breakpoints()[1], 0.3, 1e-15);
    EXPECT_NEAR(s.horizon(), 0.5, 1e-15);
    EXPECT_EQ(s.max_positive_part(), 4.0);
}

TEST(StabilityGuard, RuleEvaluation) {
    const Grid g = make_grid(1, 9, {1.0});
    const double v1 = std::log(2.0) / 0.01;
    const auto s = ControlSchedule::constant(g, v1, 0.01);
    const auto f = Nonlinearity::scaled_sine(0.1);
    const GuardResult bad = stability_guard(0.01, s, f);
    EXPECT_FALSE(bad.ok);
    EXPECT_NEAR(bad.value, 0.693147, 1e-6);
    EXPECT_NE(bad.detail.find("max v+"), std::string::npos);
    const GuardResult good = stability_guard(0.005, s, f);
    EXPECT_TRUE(good.ok);
    EXPECT_NEAR(good.value, 0.346574, 1e-6);
    EXPECT_TRUE(stability_guard(0.01, ControlSchedule::constant(g, -50.0, 0.01), Nonlinearity::zero()).ok);
    EXPECT_THROW(stability_guard(0.0, s, f), ConfigError);
}

TEST(StabilityGuard, ReportsLipschitzWhenItDominates) {
    const GuardResult r = stability_guard(0.1, 1.0, Nonlinearity::scaled_sine(10.0));
    EXPECT_FALSE(r.ok);
    EXPECT_NE(r.detail.find("L ="), std::string::npos);
}

TEST(Lipschitz, SelfCheck) {
    std::vector<double> xs;
    for (int i = -100; i <= 100; ++i) xs.push_back(0.1 * i);
    EXPECT_TRUE(lipschitz_selfcheck(Nonlinearity::scaled_sine(0.1), xs));
    EXPECT_TRUE(lipschitz_selfcheck(Nonlinearity::saturating(0.7), xs));
    EXPECT_TRUE(lipschitz_selfcheck(Nonlinearity::zero(), xs));
    EXPECT_FALSE(lipschitz_selfcheck([](double u) { return u * u; }, 1.0, xs));
    EXPECT_FALSE(lipschitz_selfcheck([](double u) { return u + 1.0; }, 5.0, xs));
    EXPECT_THROW(lipschitz_selfcheck(Nonlinearity::zero(), std::vector<double>{}), ConfigError);
    EXPECT_THROW(Nonlinearity::linear(2.0, 1.0), ConfigError);
}

TEST(StepImex, ZeroStaysZero) {
    const Grid g = make_grid(1, 9, {1.0});
    const ScalarField z = step_imex(ScalarField(g), ScalarField(g, 3.0), 0.01, Nonlinearity::scaled_sine(1.0));
    EXPECT_EQ(linf_norm(z), 0.0);
}

TEST(StepImex, SineFactorOnThreeNodes) {
    const Grid g = make_grid(1, 3, {1.0});
    const double h = 0.25, dt = 0.01;
    const double lam_h = (2.0 - 2.0 * std::cos(kPi * h)) / (h * h);
    const ScalarField u = sine(g);
    const ScalarField heat = step_imex(u, ScalarField(g), dt, Nonlinearity::zero());
    const ScalarField lin = step_imex(u, ScalarField(g), dt, Nonlinearity::linear(0.1));
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(heat[k], u[k] / (1.0 + dt * lam_h), 1e-13);
        EXPECT_NEAR(lin[k], u[k] * (1.0 + dt * 0.1) / (1.0 + dt * lam_h), 1e-13);
    }
    EXPECT_NEAR(1.0 / (1.0 + dt * lam_h), 0.914311, 1e-5);
    EXPECT_NEAR(1.001 / (1.0 + dt * lam_h), 0.915225, 1e-5);
}

TEST(StepImex, SolvesTheImplicitSystem) {
    const Grid g = make_grid(2, 12, {1.0, 1.5});
    const ScalarField u = ScalarField::sample(g, [](double x, double y) { return x * (1 - x) * std::sin(y); });
    const ScalarField v = ScalarField::sample(g, [](double x, double y) { return -3.0 * x + y; });
    const double dt = 1e-3;
    const auto f = Nonlinearity::saturating(0.4);
    for (auto solver : {LinearSolver::direct, LinearSolver::conjugate_gradient}) {
        SolveOptions o;
        o.solver = solver;
        const ScalarField next = step_imex(u, v, dt, f, o);
        // (I - dt Lap - dt v) next = u + dt f(u), checked with the explicit stencil.
        const ScalarField lhs = next + (-dt) * laplacian(next) + (-dt) * v.times(next);
        const ScalarField rhs = u + dt * f(u);
        EXPECT_LT(max_abs_diff(lhs, rhs), 1e-11);
    }
}

TEST(StepImex, ReactionOnlyIsExactExponential) {
    const Grid g = make_grid(1, 7, {1.0});
    const ScalarField u = sine(g);
    const ScalarField v = ScalarField::sample(g, [](double x) { return 5.0 - 20.0 * x; });
    SolveOptions o;
    o.diffusion = false;
    const ScalarField next = step_imex(u, v, 0.03, Nonlinearity::zero(), o);
    for (std::size_t k = 0; k < u.size(); ++k) EXPECT_NEAR(next[k], std::exp(v[k] * 0.03) * u[k], 1e-14);
}

TEST(StepImex, ReactionOnlyIsFourthOrderWithReaction) {
    // u' = v u + c u has the closed form exp((v + c) t) u0.
    const Grid g = make_grid(1, 3, {1.0});
    const ScalarField u(g, 1.0), v(g, -2.0);
    SolveOptions o;
    o.diffusion = false;
    std::vector<double> errs;
    for (int steps : {4, 8, 16}) {
        ScalarField w = u;
        for (int i = 0; i < steps; ++i) w = step_imex(w, v, 1.0 / steps, Nonlinearity::linear(0.5), o);
        errs.push_back(std::abs(w[0] - std::exp(-1.5)));
    }
    EXPECT_GT(std::log2(errs[0] / errs[1]), 3.8);
    EXPECT_GT(std::log2(errs[1] / errs[2]), 3.8);
}

TEST(Solve, HeatDecayOfFirstMode) {
    const Grid g = make_grid(1, 99, {1.0});
    const auto tr = solve(problem(g, Nonlinearity::zero(), sine(g), 0.1), ControlSchedule::constant(g, 0.0, 0.1), 1e-4);
    const double exact = std::exp(-kPi * kPi * 0.1) * std::sqrt(0.5);
    EXPECT_NEAR(exact, 0.263585, 5e-5);
    EXPECT_NEAR(l2_norm(tr.final_state()), exact, 2e-3 * exact);
    EXPECT_EQ(tr.steps(), 1000u);
    EXPECT_EQ(tr.times.back(), 0.1);
    EXPECT_EQ(tr.records.size(), 1001u);
}

TEST(Solve, ConstantControlShiftsDecay) {
    const Grid g = make_grid(1, 99, {1.0});
    const double v = std::log(0.5) / 0.1;
    EXPECT_NEAR(v, -6.93147, 1e-5);
    const auto tr = solve(problem(g, Nonlinearity::zero(), sine(g), 0.1), ControlSchedule::constant(g, v, 0.1), 1e-4);
    const double amp = 0.5 * std::exp(-kPi * kPi * 0.1);
    EXPECT_NEAR(amp, 0.186366, 2e-5);
    EXPECT_NEAR(tr.final_state()[49], amp, 2e-3 * amp);
}

TEST(Solve, FirstOrderInTimeSecondInSpace) {
    const double T = 0.1;
    auto run = [&](int n, double dt) {
        const Grid g = make_grid(1, n, {1.0});
        return l2_norm(solve(problem(g, Nonlinearity::zero(), sine(g), T), ControlSchedule::constant(g, 0.0, T), dt)
                           .final_state());
    };
    const double a = run(99, 4e-4), b = run(99, 2e-4), c = run(99, 1e-4);
    EXPECT_NEAR(std::log2((a - b) / (b - c)), 1.0, 0.1);
    const double p = run(24, 1e-3), q = run(49, 1e-3), r = run(99, 1e-3);
    EXPECT_NEAR(std::log2((p - q) / (q - r)), 2.0, 0.1);
}

TEST(Solve, ZeroInitialStateStaysZero) {
    const Grid g = make_grid(1, 19, {1.0});
    const auto s = ControlSchedule({0.0, 0.01, 0.02}, {ScalarField(g, 40.0), ScalarField(g, -9.0)});
    const auto tr = solve(problem(g, Nonlinearity::saturating(2.0), ScalarField(g), 0.02), s, 1e-3);
    for (const auto& u : tr.states) EXPECT_EQ(linf_norm(u), 0.0);
}

TEST(Solve, HomogeneousInLinearCase) {
    const Grid g = make_grid(1, 31, {1.0});
    const ScalarField u0 = ScalarField::sample(g, [](double x) { return x * (1 - x) * (2 + std::cos(7 * x)); });
    const ScalarField v = ScalarField::sample(g, [](double x) { return 3.0 - 10.0 * x; });
    const auto s = ControlSchedule::constant(v, 0.05);
    for (auto f : {Nonlinearity::zero(), Nonlinearity::linear(-0.7)}) {
        const auto a = solve(problem(g, f, u0, 0.05), s, 1e-3).final_state();
        const auto b = solve(problem(g, f, -2.5 * u0, 0.05), s, 1e-3).final_state();
        EXPECT_LT(max_abs_diff(-2.5 * a, b), 1e-10);
    }
}

TEST(Solve, StaysNonnegative) {
    const Grid g = make_grid(2, 15, {1.0, 1.0});
    const ScalarField u0 = ScalarField::sample(g, [](double x, double y) { return x * y * (x > 0.6 ? 1.0 : 0.0); });
    const ScalarField v1 = ScalarField::sample(g, [](double x, double y) { return 100.0 * (x - y); });
    const auto s = ControlSchedule({0.0, 0.002, 0.004}, {v1, -1.0 * v1});
    const auto tr = solve(problem(g, Nonlinearity::scaled_sine(1.0), u0, 0.004), s, 5e-4);
    for (const auto& r : tr.records) EXPECT_GE(r.min_u, -1e-12);
}

TEST(Solve, RejectsMisalignedBreakpoints) {
    const Grid g = make_grid(1, 9, {1.0});
    const ControlSchedule s({0.0, 0.00015, 0.001}, {ScalarField(g), ScalarField(g)});
    EXPECT_THROW(solve(problem(g, Nonlinearity::zero(), sine(g), 0.001), s, 1e-4), AlignmentError);
}

TEST(Solve, RejectsGuardViolationAndHorizonMismatch) {
    const Grid g = make_grid(1, 9, {1.0});
    const auto p = problem(g, Nonlinearity::zero(), sine(g), 0.01);
    EXPECT_THROW(solve(p, ControlSchedule::constant(g, 69.3147, 0.01), 0.01), StabilityError);
    EXPECT_THROW(solve(p, ControlSchedule::constant(g, 0.0, 0.02), 0.01), ConfigError);
}

TEST(Solve, StepsUseRightEndpointControl) {
    // With diffusion off each node evolves as exp(sum of v_k * step lengths).
    const Grid g = make_grid(1, 3, {1.0});
    const ControlSchedule s({0.0, 0.3, 0.5}, {ScalarField(g, 1.0), ScalarField(g, -4.0)});
    SolveOptions o;
    o.diffusion = false;
    const auto tr = solve(problem(g, Nonlinearity::zero(), ScalarField(g, 1.0), 0.5), s, 0.1, o);
    EXPECT_NEAR(tr.states[3][0], std::exp(0.3), 1e-14);
    EXPECT_NEAR(tr.states[4][0], std::exp(0.3 - 0.4), 1e-14);
    EXPECT_NEAR(tr.final_state()[0], std::exp(0.3 - 0.8), 1e-14);
}

TEST(Solve, KeepStatesOff) {
    const Grid g = make_grid(1, 9, {1.0});
    SolveOptions o;
    o.keep_states = false;
    const auto p = problem(g, Nonlinearity::zero(), sine(g), 0.01);
    const auto s = ControlSchedule::constant(g, 0.0, 0.01);
    const auto a = solve(p, s, 1e-3, o), b = solve(p, s, 1e-3);
    EXPECT_EQ(a.states.size(), 2u);
    EXPECT_EQ(a.records.size(), 11u);
    EXPECT_EQ(max_abs_diff(a.final_state(), b.final_state()), 0.0);
    EXPECT_THROW((void)a.state(3), ConfigError);
}

TEST(Solve, DirectAndIterativeAgreeIn2D) {
    const Grid g = make_grid(2, 20, {1.0, 1.0});
    const ScalarField u0 = ScalarField::sample(g, [](double x, double y) { return std::sin(kPi * x) * y * (1 - y); });
    const ScalarField v = ScalarField::sample(g, [](double x, double y) { return 10.0 * x * y - 5.0; });
    const auto p = problem(g, Nonlinearity::scaled_sine(0.5), u0, 0.01);
    SolveOptions d, c;
    d.solver = LinearSolver::direct;
    c.solver = LinearSolver::conjugate_gradient;
    const auto s = ControlSchedule::constant(v, 0.01);
    EXPECT_LT(max_abs_diff(solve(p, s, 1e-3, d).final_state(), solve(p, s, 1e-3, c).final_state()), 1e-10);
}

TEST(SolvePiecewise, MatchesSolveWithCommonStep) {
    const Grid g = make_grid(1, 21, {1.0});
    const ControlSchedule s({0.0, 0.004, 0.01}, {ScalarField(g, 20.0), ScalarField(g, -3.0)});
    const auto p = problem(g, Nonlinearity::saturating(1.0), sine(g), 0.01);
    const std::vector<double> dts{1e-3, 1e-3};
    const auto a = solve(p, s, 1e-3), b = solve_piecewise(p, s, dts);
    ASSERT_EQ(a.times.size(), b.times.size());
    for (std::size_t j = 0; j < a.times.size(); ++j) EXPECT_NEAR(a.times[j], b.times[j], 1e-15);
    EXPECT_LT(max_abs_diff(a.final_state(), b.final_state()), 1e-14);
}

TEST(SolvePiecewise, PerStepSizesAndErrors) {
    const Grid g = make_grid(1, 21, {1.0});
    const ControlSchedule s({0.0, 0.004, 0.01}, {ScalarField(g, 20.0), ScalarField(g, -3.0)});
    const auto p = problem(g, Nonlinearity::zero(), sine(g), 0.01);
    const std::vector<double> dts{5e-4, 2e-3};
    const auto tr = solve_piecewise(p, s, dts);
    EXPECT_EQ(tr.steps(), 8u + 3u);
    EXPECT_EQ(tr.dt, 5e-4);
    EXPECT_EQ(tr.times[8], 0.004);
    EXPECT_EQ(tr.times.back(), 0.01);
    const std::vector<double> bad{5e-4, 4e-3};
    EXPECT_THROW(solve_piecewise(p, s, bad), AlignmentError);
    EXPECT_THROW(solve_piecewise(p, s, std::vector<double>{1e-3}), ConfigError);
}

TEST(TraceCsv, HeaderAndRows) {
    const Grid g = make_grid(1, 5, {1.0});
    const auto tr = solve(problem(g, Nonlinearity::zero(), sine(g), 0.002), ControlSchedule::constant(g, 0.0, 0.002), 1e-3);
    std::ostringstream os;
    write_trace_csv(os, tr);
    const std::string s = os.str();
    EXPECT_EQ(s.rfind("t,l2_u,linf_u,l2_f_u,l2_lap_u\n0,", 0), 0u);
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
}
