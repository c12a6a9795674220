#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fwdopt/fwdopt.hpp"

using namespace fwdopt;

namespace {

ScenarioPath bare_path(const TimeGrid& g) { return ScenarioPath(g); }

PortfolioProcess certified(double pi, const ModelCoefficients& c, const ScenarioPath& path) {
    auto r = check_admissibility(constant_policy(pi), InformationFlow::full(), c, path);
    EXPECT_TRUE(r.admissible());
    return r.portfolio;
}

}  // namespace

TEST(Asset, GeometricBrownianMean) {
    TimeGrid g(1.0, 1);
    auto c = ModelCoefficients::constant(g, 0.0, 0.05, 0.2, 0.0);
    RunningStats s;
    for (std::uint64_t p = 0; p < 400000; ++p) {
        auto path = simulate_scenario(g, LevyMeasure::none(), 1, NoDefault{}, path_seed(1, p));
        s.add(evaluate_asset(c, path).s1.back());
    }
    EXPECT_NEAR(s.mean(), std::exp(0.05), 3.0 * s.std_error());
}

TEST(Asset, ProductFormMatchesDirectFormula) {
    TimeGrid g(2.0, 40);
    auto c = ModelCoefficients::constant(g, 0.03, 0.08, 0.25, -0.3);
    auto path = simulate_scenario(g, LevyMeasure::none(), 1, IndependentIntensity::constant(g, 1.0), 2);
    const auto a = evaluate_asset(c, path, 2.0, 3.0);
    const auto w = path.wiener_path();
    const auto h = path.default_counts();
    for (std::size_t k = 0; k <= 40; ++k) {
        const double t = g.time(k);
        const double s1 = 3.0 * std::exp((0.08 - 0.5 * 0.0625) * t + 0.25 * w[k]) * std::pow(0.7, h[k]);
        EXPECT_NEAR(a.s1[k], s1, 1e-12 * s1);
        EXPECT_NEAR(a.s0[k], 2.0 * std::exp(0.03 * t), 1e-13);
    }
}

TEST(Asset, MarkJumpsUseCompensatedDrift) {
    TimeGrid g(1.0, 10);
    auto c = ModelCoefficients::constant(g, 0.0, 0.0, 0.0, 0.0);
    c.nu = LevyMeasure::from_atoms({{1.0, 2.0}});
    c.theta_mark = [](double z) { return 0.5 * z; };
    c.validate(g);
    auto path = bare_path(g);
    path.poisson_marks = {{4, 0.35, 1.0}};
    const auto a = evaluate_asset(c, path);
    EXPECT_NEAR(a.s1.back(), std::exp(-1.0) * 1.5, 1e-14);
    EXPECT_NEAR(a.s1[3], std::exp(-0.3), 1e-14);
}

TEST(Asset, TotalDefaultKillsTheAsset) {
    TimeGrid g(1.0, 10);
    auto c = ModelCoefficients::constant(g, 0.02, 0.05, 0.2, -1.0);
    auto path = bare_path(g);
    path.default_nodes = {6};
    const auto a = evaluate_asset(c, path);
    EXPECT_GT(a.s1[5], 0.0);
    for (std::size_t k = 6; k <= 10; ++k) EXPECT_EQ(a.s1[k], 0.0);
    EXPECT_EQ(apply_stopping(StoppingKind::zero_value, path, a).node, 6u);
    EXPECT_EQ(apply_stopping(StoppingKind::horizon_only, path, a).node, 6u);
}

TEST(Asset, EulerConvergesToProductForm) {
    auto gap = [](std::size_t n) {
        TimeGrid fine(1.0, 4096);
        RunningStats s;
        for (std::uint64_t p = 0; p < 200; ++p) {
            auto path = simulate_scenario(fine, LevyMeasure::none(), 1, NoDefault{}, path_seed(3, p));
            auto coarse = coarsen(path, 4096 / n);
            TimeGrid g = coarse.grid;
            auto c = ModelCoefficients::constant(g, 0.0, 0.1, 0.3, 0.0);
            s.add(std::abs(euler_asset(c, coarse).back() - evaluate_asset(c, coarse).s1.back()));
        }
        return s.mean();
    };
    EXPECT_LT(gap(1024), gap(64) / 2.5);
}

TEST(Stopping, FirstDefaultAndHorizon) {
    TimeGrid g(1.0, 10);
    auto c = ModelCoefficients::constant(g, 0.0, 0.05, 0.2, -0.5);
    auto path = bare_path(g);
    path.default_nodes = {4, 8};
    const auto a = evaluate_asset(c, path);
    EXPECT_EQ(apply_stopping(StoppingKind::first_default, path, a).node, 4u);
    EXPECT_DOUBLE_EQ(apply_stopping(StoppingKind::first_default, path, a).time, 0.4);
    EXPECT_EQ(apply_stopping(StoppingKind::horizon_only, path, a).node, 10u);
}

TEST(Validation, RejectsBadCoefficients) {
    TimeGrid g(1.0, 4);
    EXPECT_THROW(ModelCoefficients::constant(g, 0.0, 0.1, -0.2, 0.0), ConfigurationError);
    EXPECT_THROW(ModelCoefficients::constant(g, 0.0, 0.1, 0.2, -1.5), ConfigurationError);
    EXPECT_THROW(ModelCoefficients::constant(g, NAN, 0.1, 0.2, 0.0), ConfigurationError);
    ModelCoefficients c = ModelCoefficients::constant(g, 0.0, 0.1, 0.2, 0.0);
    c.nu = LevyMeasure::from_atoms({{-0.5, 1.0}});
    c.theta_mark = [](double z) { return 2.0 * z; };
    EXPECT_THROW(c.validate(g), ConfigurationError);
    c.pre.mu.pop_back();
    EXPECT_THROW(c.validate(g), ConfigurationError);
    auto ok = ModelCoefficients::constant(g, 0.0, 0.1, 0.2, 0.0);
    EXPECT_THROW(evaluate_asset(ok, ScenarioPath(TimeGrid(1.0, 5))), ContractViolation);
}

TEST(Wealth, DefaultJumpFactor) {
    TimeGrid g(1.0, 10);
    auto c = ModelCoefficients::constant(g, 0.0, 0.0, 0.0, -0.4);
    auto path = bare_path(g);
    path.default_nodes = {5};
    const auto a = evaluate_asset(c, path);
    const auto w = evaluate_wealth(certified(0.5, c, path), c, path, apply_stopping(StoppingKind::horizon_only, path, a));
    EXPECT_NEAR(w.terminal, 0.8, 1e-15);
    EXPECT_NEAR(w.pre_stop[4], 1.0, 1e-15);
    EXPECT_NEAR(w.pre_stop[5], 0.8, 1e-15);
}

TEST(Wealth, ClosedFormLogWealth) {
    TimeGrid g(1.0, 50);
    auto c = ModelCoefficients::constant(g, 0.02, 0.08, 0.2, 0.0);
    auto path = simulate_scenario(g, LevyMeasure::none(), 1, NoDefault{}, 4);
    const auto a = evaluate_asset(c, path);
    const double pi = 1.5;
    const auto w = evaluate_wealth(certified(pi, c, path), c, path, apply_stopping(StoppingKind::horizon_only, path, a), 2.0);
    const double expected = std::log(2.0) + 0.02 + 0.06 * pi - 0.5 * 0.04 * pi * pi + pi * 0.2 * path.wiener_path().back();
    EXPECT_NEAR(w.log_terminal, expected, 1e-12);
}

TEST(Wealth, StoppedWealthCompoundsAtBondRate) {
    TimeGrid g(1.0, 10);
    auto c = ModelCoefficients::constant(g, 0.05, 0.1, 0.0, -0.5);
    auto path = bare_path(g);
    path.default_nodes = {3};
    const auto a = evaluate_asset(c, path);
    const auto stop = apply_stopping(StoppingKind::first_default, path, a);
    const auto w = evaluate_wealth(certified(1.0, c, path), c, path, stop);
    // stopped at node 3, after the jump (1 + pi kappa) = 0.5
    const double x_tau = std::exp((0.05 + 0.05) * 0.3) * 0.5;
    EXPECT_NEAR(w.pre_stop[10], x_tau, 1e-14);
    EXPECT_NEAR(w.terminal, x_tau * std::exp(0.05 * 0.7), 1e-14);
}

TEST(Wealth, EulerMatchesClosedFormUnderRefinement) {
    TimeGrid fine(1.0, 2048);
    RunningStats coarse_gap, fine_gap;
    for (std::uint64_t p = 0; p < 200; ++p) {
        auto path = simulate_scenario(fine, LevyMeasure::none(), 1, IndependentIntensity::constant(fine, 0.5),
                                      path_seed(5, p));
        for (std::size_t f : {32u, 2u}) {
            auto cp = coarsen(path, f);
            auto c = ModelCoefficients::constant(cp.grid, 0.01, 0.07, 0.25, -0.3);
            const auto a = evaluate_asset(c, cp);
            const auto stop = apply_stopping(StoppingKind::horizon_only, cp, a);
            const auto pp = certified(0.8, c, cp);
            const double gap = std::abs(evaluate_wealth(pp, c, cp, stop).terminal -
                                        euler_wealth(pp.values, c, cp, stop).terminal);
            (f == 32 ? coarse_gap : fine_gap).add(gap);
        }
    }
    EXPECT_LT(fine_gap.mean(), coarse_gap.mean() / 2.0);
}

TEST(Wealth, RequiresCertificate) {
    TimeGrid g(1.0, 4);
    auto c = ModelCoefficients::constant(g, 0.0, 0.1, 0.2, 0.0);
    auto path = bare_path(g);
    PortfolioProcess raw{std::vector<double>(4, 1.0), std::nullopt};
    EXPECT_THROW(evaluate_wealth(raw, c, path, {4, 1.0}), ContractViolation);
}

TEST(Admissibility, MarginViolationHasWitness) {
    TimeGrid g(1.0, 10);
    auto c = ModelCoefficients::constant(g, 0.0, 0.1, 0.2, -0.6);
    const auto r = check_admissibility(constant_policy(2.0), InformationFlow::full(), c, bare_path(g));
    ASSERT_FALSE(r.admissible());
    EXPECT_EQ(r.violations.front().item, 2);
    EXPECT_EQ(r.violations.front().node, 0u);
    EXPECT_FALSE(r.portfolio.certificate.has_value());
}

TEST(Admissibility, MarkMarginChecksSupport) {
    TimeGrid g(1.0, 10);
    auto c = ModelCoefficients::constant(g, 0.0, 0.1, 0.2, 0.0);
    c.nu = LevyMeasure::from_atoms({{-0.5, 1.0}, {0.5, 1.0}});
    c.theta_mark = [](double z) { return z; };
    c.validate(g);
    const auto bad = check_admissibility(constant_policy(2.5), InformationFlow::full(), c, bare_path(g));
    ASSERT_FALSE(bad.admissible());
    ASSERT_TRUE(bad.violations.front().mark.has_value());
    EXPECT_EQ(*bad.violations.front().mark, -0.5);
    const auto good = check_admissibility(constant_policy(1.5), InformationFlow::full(), c, bare_path(g));
    ASSERT_TRUE(good.admissible());
    EXPECT_NEAR(good.portfolio.epsilon_pi(), 0.25, 1e-15);
}

TEST(Admissibility, ClaimedValuesMustBeReproduced) {
    TimeGrid g(1.0, 10);
    auto c = ModelCoefficients::constant(g, 0.0, 0.1, 0.2, 0.0);
    std::vector<double> claimed(10, 1.0);
    claimed[7] = 1.1;
    const auto r = check_admissibility(constant_policy(1.0), InformationFlow::full(), c, bare_path(g), &claimed);
    ASSERT_FALSE(r.admissible());
    EXPECT_EQ(r.violations.front().item, 1);
    EXPECT_EQ(r.violations.front().node, 7u);
}

TEST(Admissibility, HiddenStateIsDetected) {
    TimeGrid g(1.0, 10);
    auto c = ModelCoefficients::constant(g, 0.0, 0.1, 0.2, 0.0);
    int calls = 0;
    Policy sneaky = [&calls](std::size_t, const std::vector<double>&) { return static_cast<double>(++calls % 3); };
    const auto r = check_admissibility(sneaky, InformationFlow::full(), c, bare_path(g));
    ASSERT_FALSE(r.admissible());
    EXPECT_EQ(r.violations.front().item, 1);
}

TEST(Admissibility, NonFiniteValueRejected) {
    TimeGrid g(1.0, 10);
    auto c = ModelCoefficients::constant(g, 0.0, 0.1, 0.2, 0.0);
    const auto r = check_admissibility(constant_policy(NAN), InformationFlow::full(), c, bare_path(g));
    ASSERT_FALSE(r.admissible());
    EXPECT_EQ(r.violations.front().item, 1);
}

TEST(Admissibility, PostDefaultRegimeIsUsed) {
    TimeGrid g(1.0, 10);
    auto c = ModelCoefficients::constant(g, 0.0, 0.1, 0.2, -0.3);
    c.post = Regime::constant(g, 0.0, 0.1, 0.2, -0.9);
    c.validate(g);
    auto path = bare_path(g);
    path.default_nodes = {3, 6};
    const auto r = check_admissibility(constant_policy(2.0), InformationFlow::full(), c, path);
    ASSERT_FALSE(r.admissible());
    EXPECT_EQ(r.violations.front().node, 3u);
    auto nodefault = bare_path(g);
    EXPECT_TRUE(check_admissibility(constant_policy(2.0), InformationFlow::full(), c, nodefault).admissible());
}
