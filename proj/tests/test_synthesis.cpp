#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "mctl/synthesis.hpp"

using namespace mctl;
using namespace mctl::synthesis;

namespace {

constexpr double kPi = std::numbers::pi;

ScalarField sine(const Grid& g) {
    return ScalarField::sample(g, [](double x) { return std::sin(kPi * x); });
}

ScalarField bump(const Grid& g) {
    return ScalarField::sample(g, [](double x) { return x * (1 - x) * (1 + std::cos(3 * kPi * x)); });
}

}  // namespace

TEST(RatioCondition, Examples) {
    const Grid g = make_grid(1, 19, {1.0});
    const ScalarField u = bump(g) + 0.01 * sine(g);
    const RatioCheck half = check_ratio_condition(u, 0.5 * u);
    EXPECT_TRUE(half.ok);
    EXPECT_NEAR(half.nu, 0.5, 1e-15);
    const RatioCheck same = check_ratio_condition(u, u);
    EXPECT_TRUE(same.ok);
    EXPECT_EQ(same.nu, 1.0);
    EXPECT_FALSE(check_ratio_condition(u, 1.2 * u).ok);
    EXPECT_FALSE(check_ratio_condition(u, ScalarField(g)).ok);
    ScalarField hole = u;
    hole[4] = 0.0;
    EXPECT_THROW(check_ratio_condition(hole, u), PreconditionError);
}

TEST(StaticControl, Examples) {
    const Grid g = make_grid(1, 19, {1.0});
    const ScalarField u = sine(g);
    EXPECT_EQ(linf_norm(static_control_thm14(u, u, 0.3)), 0.0);
    const ScalarField v = static_control_thm14(u, 0.5 * u, 0.1);
    for (double x : v.values()) EXPECT_NEAR(x, std::log(0.5) / 0.1, 1e-12);
    EXPECT_NEAR(v[0], -6.93147, 1e-5);
    EXPECT_THROW(static_control_thm14(u, 1.2 * u, 0.1), PreconditionError);
    EXPECT_THROW(static_control_thm14(u, u, 0.0), ConfigError);
}

TEST(StaticControl, NonpositiveForAnyAdmissiblePair) {
    const Grid g = make_grid(2, 11, {1.0, 2.0});
    const ScalarField u = ScalarField::sample(g, [](double x, double y) { return 1.0 + x * y; });
    const ScalarField w = ScalarField::sample(g, [](double x, double y) { return 0.5 + 0.3 * std::sin(x + y); });
    const ScalarField v = static_control_thm14(u, w.times(u), 0.7);
    EXPECT_LE(v.max(), 0.0);
}

TEST(StaticControl, ExactWithoutDiffusionOrReaction) {
    const Grid g = make_grid(1, 49, {1.0});
    const ScalarField u0 = bump(g) + 0.05 * sine(g);
    const ScalarField ustar = u0.times(ScalarField::sample(g, [](double x) { return 0.3 + 0.6 * x; }));
    const double T = 0.4;
    SolveOptions o;
    o.diffusion = false;
    const auto tr = solve({g, Nonlinearity::zero(), u0, T}, ControlSchedule::constant(static_control_thm14(u0, ustar, T), T),
                          0.01, o);
    for (std::size_t k = 0; k < u0.size(); ++k) EXPECT_NEAR(tr.final_state()[k], ustar[k], 1e-10);
}

TEST(Approximants, NearIdentityPair) {
    const Grid g = make_grid(1, 99, {1.0});
    const double eps = 0.8;
    const ApproximantPair p = build_approximants(sine(g), sine(g), eps, 0.0);
    EXPECT_LE(p.amplification, 1.05 * (1 + 1e-3));
    EXPECT_GT(p.amplification, 1.0);
    EXPECT_EQ(p.iterations, 1);
    EXPECT_LT(l2_distance(p.ustar_eps, sine(g)), eps / 4);
    EXPECT_LT(l2_distance(p.u0_eps, sine(g)), eps / (16 * p.amplification));
}

TEST(Approximants, InvariantsWithZeroPlateau) {
    const Grid g = make_grid(1, 99, {1.0});
    const ScalarField u0 = bump(g);
    const ScalarField ustar = ScalarField::sample(g, [](double x) { return x < 0.5 ? 0.0 : std::max(0.0, -0.3 * std::sin(2 * kPi * x)); });
    const double eps = 0.1, L = 0.2;
    const ApproximantPair p = build_approximants(u0, ustar, eps, L);
    for (std::size_t k = 0; k < u0.size(); ++k) {
        EXPECT_GT(p.u0_eps[k], 0.0);
        EXPECT_GT(p.ustar_eps[k], 0.0);
        const double q = p.ustar_eps[k] / p.u0_eps[k];
        EXPECT_GT(q, 0.0);
        EXPECT_LE(q, p.amplification);
    }
    EXPECT_TRUE(std::isfinite(p.amplification));
    EXPECT_LT(l2_distance(p.ustar_eps, ustar), eps / 4);
    EXPECT_LT(l2_distance(p.u0_eps, u0), eps / (16 * std::exp(L) * p.amplification));
}

TEST(Approximants, RejectsBadInput) {
    const Grid g = make_grid(1, 19, {1.0});
    EXPECT_THROW(build_approximants(ScalarField(g), sine(g), 0.1, 0.0), PreconditionError);
    EXPECT_THROW(build_approximants(-1.0 * sine(g), sine(g), 0.1, 0.0), PreconditionError);
    EXPECT_THROW(build_approximants(sine(g), sine(g), 0.0, 0.0), ConfigError);
}

TEST(ChooseEta, TrivialCases) {
    const Grid g = make_grid(1, 99, {1.0});
    EXPECT_EQ(choose_eta(ScalarField(g), 0.1), 0.25);
    EXPECT_EQ(choose_eta(sine(g), 1e6), 0.25);
}

TEST(ChooseEta, SineStripAgainstSmallAngleIntegral) {
    const Grid g = make_grid(1, 399, {1.0});
    const double eps = 0.2;
    const double eta = choose_eta(sine(g), eps);
    EXPECT_LT(strip_mass(sine(g), eta), eps / 4);
    EXPECT_GE(strip_mass(sine(g), 2 * eta), eps / 4);
    // The removed mass lies between the sharp strips of width eta/2 and eta.
    auto sharp = [](double w) { return std::sqrt(2.0 * kPi * kPi * w * w * w / 3.0); };
    EXPECT_GE(strip_mass(sine(g), eta), 0.9 * sharp(0.5 * eta));
    EXPECT_LE(strip_mass(sine(g), eta), 1.1 * sharp(eta));
    EXPECT_GE(eta, 0.07 / 2);
    EXPECT_LE(eta, 0.25);
}

TEST(CutoffTargets, InteriorStripAndEquality) {
    const Grid g = make_grid(1, 99, {1.0});
    const ApproximantPair p = build_approximants(bump(g) + 0.1 * sine(g), 0.4 * sine(g), 0.2, 0.0);
    const double eta = 0.2;
    const CutoffTargets t = cutoff_targets(p, eta);
    const ScalarField d = boundary_distance(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_LE(t.v0_eta[k], 0.0);
        if (d[k] >= eta) {
            EXPECT_NEAR(t.v0_eta[k], std::log(p.ustar_eps[k] / (p.amplification * p.u0_eps[k])), 1e-14);
            EXPECT_EQ(t.u_eta_star[k], p.ustar_eps[k]);
        }
        if (d[k] <= eta / 2) {
            EXPECT_EQ(t.v0_eta[k], 0.0);
            EXPECT_EQ(t.u_eta_star[k], 0.0);
        }
    }
    ApproximantPair eq = p;
    eq.ustar_eps = p.amplification * p.u0_eps;
    EXPECT_LT(linf_norm(cutoff_targets(eq, eta).v0_eta), 1e-14);
    ApproximantPair broken = p;
    broken.ustar_eps = 2.0 * p.amplification * p.u0_eps;
    EXPECT_THROW(cutoff_targets(broken, eta), NumericalError);
}

TEST(Phase1Control, Examples) {
    EXPECT_NEAR(phase1_control(2.0, 0.01), 69.3147, 1e-4);
    EXPECT_NEAR(phase1_control(std::numbers::e, 1.0), 1.0, 1e-15);
    EXPECT_NEAR(std::exp(phase1_control(3.7, 0.013) * 0.013), 3.7, 1e-12);
    EXPECT_THROW(phase1_control(1.0, 0.01), PreconditionError);
    EXPECT_EQ(phase1_steps(1.05), kPhase1Steps);
    EXPECT_GT(phase1_steps(200.0, 1e-4), kPhase1Steps);
    EXPECT_LE(phase1_steps(1e300, 1e-12), kMaxPhase1Steps);
}

TEST(FindT1, LinearEigenmodeCase) {
    const Grid g = make_grid(1, 99, {1.0});
    ApproximantPair p;
    p.u0_eps = sine(g);
    p.ustar_eps = sine(g);
    p.amplification = 2.0;
    const ProblemSpec prob{g, Nonlinearity::zero(), sine(g), 0.5};
    const double eps = 0.8;
    const T1Search s = find_T1(prob, p, eps);
    ASSERT_TRUE(s.found);
    EXPECT_LE(s.t1, 0.00716);
    const double exact = 2.0 * (1.0 - std::exp(-kPi * kPi * s.t1)) * std::sqrt(0.5);
    EXPECT_LE(exact, eps / 8);
    EXPECT_LE(s.phase1, eps / 8);
    // Backward Euler on the discrete eigenmode: factor (1 - dt (v1 - lam_h))^(-N).
    const double h = g.h(0), lam_h = (2.0 - 2.0 * std::cos(kPi * h)) / (h * h);
    const double steps = std::round(s.t1 / s.dt);
    const double factor = std::pow(1.0 - s.dt * (s.v1 - lam_h), -steps);
    EXPECT_NEAR(s.phase1, std::abs(2.0 - factor) * std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(std::exp(s.v1 * s.t1), 2.0, 1e-12);
}

TEST(FindT1, HugeEpsAcceptsFirstCandidate) {
    const Grid g = make_grid(1, 49, {1.0});
    ApproximantPair p;
    p.u0_eps = sine(g);
    p.ustar_eps = sine(g);
    p.amplification = 2.0;
    const T1Search s = find_T1({g, Nonlinearity::zero(), sine(g), 0.5}, p, 1e6);
    ASSERT_TRUE(s.found);
    EXPECT_EQ(s.t1, 0.01);
    EXPECT_EQ(s.halvings, 0);
}

TEST(FindT1, FarInitialStateFails) {
    const Grid g = make_grid(1, 49, {1.0});
    ApproximantPair p;
    p.u0_eps = sine(g);
    p.ustar_eps = sine(g);
    p.amplification = 2.0;
    const T1Search s = find_T1({g, Nonlinearity::zero(), 3.0 * sine(g), 0.5}, p, 0.1);
    EXPECT_FALSE(s.found);
    EXPECT_GT(s.best_phase1, 0.1 / 8);
}

TEST(TwoPhaseSchedule, Structure) {
    const Grid g = make_grid(1, 19, {1.0});
    SynthesisPlan plan;
    plan.t1 = 0.01;
    plan.v1 = 69.3147;
    plan.v0_eta = -1.0 * sine(g);
    const ControlSchedule s = two_phase_schedule(plan, 0.2);
    EXPECT_EQ(control_at(s, 0.005).min(), 69.3147);
    EXPECT_EQ(control_at(s, 0.005).max(), 69.3147);
    const ScalarField& v2 = control_at(s, 0.105);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(v2[k], -sine(g)[k] / 0.19, 1e-14);
    plan.v0_eta = ScalarField(g);
    EXPECT_EQ(linf_norm(two_phase_schedule(plan, 0.2).step(1)), 0.0);
    EXPECT_THROW(two_phase_schedule(plan, 0.01), ConfigError);
}

TEST(FittedDt, DividesLength) {
    const double dt = fitted_dt(0.0123, 1e-3);
    EXPECT_LE(dt, 1e-3);
    EXPECT_NEAR(0.0123 / dt, std::round(0.0123 / dt), 1e-9);
    EXPECT_EQ(fitted_dt(0.01, 1e-3), 0.01 / 10);
}

TEST(RefineIterate, AtTargetControlsVanish) {
    const Grid g = make_grid(1, 49, {1.0});
    const auto r = refine_iterate(sine(g), sine(g), 0.0, 0.01, 1, Nonlinearity::zero(), 1e-3);
    EXPECT_EQ(linf_norm(r.schedule.step(0)), 0.0);
}

TEST(RefineIterate, SingleStepIsClampedStaticControl) {
    const Grid g = make_grid(1, 49, {1.0});
    const ScalarField u = bump(g) + 0.1 * sine(g);
    const ScalarField target = ScalarField::sample(g, [](double x) { return 0.1 * std::sin(kPi * x) * (1 + x); });
    const auto r = refine_iterate(u, target, 0.3, 0.35, 1, Nonlinearity::zero(), 1e-3);
    ASSERT_EQ(r.schedule.size(), 1u);
    EXPECT_NEAR(r.schedule.horizon(), 0.05, 1e-15);
    for (std::size_t k = 0; k < g.size(); ++k)
        EXPECT_NEAR(r.schedule.step(0)[k], std::min(0.0, std::log(target[k] / u[k]) / 0.05), 1e-9);
}

TEST(RefineIterate, MoreSubintervalsSteerCloser) {
    const Grid g = make_grid(1, 49, {1.0});
    const ScalarField u = sine(g), target = 0.5 * sine(g);
    double prev = 1e300;
    for (int n : {1, 2, 4, 8}) {
        const auto r = refine_iterate(u, target, 0.0, 0.1, n, Nonlinearity::zero(), 1e-3);
        EXPECT_EQ(r.errors.size(), static_cast<std::size_t>(n));
        EXPECT_LT(r.errors.back(), prev);
        EXPECT_LE(r.schedule.max_positive_part(), 0.0);
        prev = r.errors.back();
    }
}

TEST(Steer, NearIdentityPipeline) {
    const Grid g = make_grid(1, 99, {1.0});
    const ProblemSpec p{g, Nonlinearity::zero(), sine(g), 0.5};
    SteerOptions o;
    o.dt_max = 1e-3;
    const SteerResult r = steer(p, sine(g), 0.1, o);
    EXPECT_TRUE(r.report.success) << r.report.note;
    EXPECT_LT(r.report.final_error, 0.1);
    EXPECT_GT(r.report.plan.amplification, 1.0);
    EXPECT_TRUE(r.report.ledger.all_pass());
    EXPECT_EQ(r.schedule.size(), static_cast<std::size_t>(2 + r.report.plan.n_iter));
    EXPECT_NEAR(r.schedule.horizon(), 0.5, 1e-12);
    EXPECT_LE(r.report.plan.v0_eta.max(), 0.0);
    EXPECT_GT(r.report.plan.v1, 0.0);
    const auto check = solve_piecewise(p, r.schedule, r.report.step_dt);
    EXPECT_NEAR(l2_distance(check.final_state(), sine(g)), r.report.final_error, 1e-12);
}

TEST(Steer, ZeroInitialStateIsRejected) {
    const Grid g = make_grid(1, 19, {1.0});
    EXPECT_THROW(steer({g, Nonlinearity::zero(), ScalarField(g), 0.5}, sine(g), 0.1), PreconditionError);
    EXPECT_THROW(steer({g, Nonlinearity::zero(), sine(g), 0.5}, -1.0 * sine(g), 0.1), PreconditionError);
}
