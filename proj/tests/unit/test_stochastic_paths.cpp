#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "fwdopt/fwdopt.hpp"

using namespace fwdopt;

namespace {

// Simpson rule on a log-spaced substitution, independent of the library quadrature.
double simpson_log(double a, double b, const std::function<double(double)>& f, int n = 20000) {
    const double la = std::log(a), lb = std::log(b), h = (lb - la) / n;
    double acc = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double s = la + k * h;
        const double z = std::exp(s);
        const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        acc += w * f(z) * z;
    }
    return acc * h / 3.0;
}

}  // namespace

TEST(Wiener, TerminalVarianceIsHorizon) {
    TimeGrid g(1.0, 100);
    RunningStats w1, sq;
    for (std::uint64_t p = 0; p < 200000; ++p) {
        const auto dw = simulate_wiener(g, path_seed(1, p));
        double w = 0.0;
        for (double d : dw) w += d;
        w1.add(w);
        sq.add(w * w);
    }
    EXPECT_NEAR(w1.mean(), 0.0, 4.0 * w1.std_error());
    EXPECT_NEAR(sq.mean(), 1.0, 0.01);
}

TEST(Wiener, MeanAbsoluteIncrement) {
    TimeGrid g(1.0, 100);
    RunningStats s;
    for (std::uint64_t p = 0; p < 100000; ++p) {
        ScenarioPath path(g);
        path.wiener_increments = simulate_wiener(g, path_seed(2, p));
        const auto w = path.wiener_path();
        s.add(std::abs(w[75] - w[50]));
    }
    EXPECT_NEAR(s.mean(), std::sqrt(0.25 * 2.0 / std::numbers::pi), 4.0 * s.std_error());
}

TEST(Wiener, SameSeedSamePath) {
    TimeGrid g(1.0, 50);
    EXPECT_EQ(simulate_wiener(g, 5), simulate_wiener(g, 5));
    EXPECT_NE(simulate_wiener(g, 5), simulate_wiener(g, 6));
}

TEST(LevyMeasure, AtomQuadratureIsExact) {
    auto nu = LevyMeasure::from_atoms({{-0.2, 1.5}, {0.3, 0.5}});
    EXPECT_DOUBLE_EQ(nu.mass(1).value, 2.0);
    EXPECT_NEAR(nu.integrate([](double z) { return z * z; }, 1).value, 0.04 * 1.5 + 0.09 * 0.5, 1e-15);
    EXPECT_NEAR(nu.second_moment(), 0.105, 1e-15);
}

TEST(LevyMeasure, AtomMarkFrequencies) {
    auto nu = LevyMeasure::from_atoms({{-0.2, 1.5}, {0.3, 0.5}});
    auto rng = make_engine(3, Stream::aux);
    int neg = 0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) neg += nu.sample_mark(rng, 1) < 0.0;
    const double p = static_cast<double>(neg) / n;
    EXPECT_NEAR(p, 0.75, 4.0 * std::sqrt(0.75 * 0.25 / n));
}

TEST(LevyMeasure, DensityMomentsMatchIndependentQuadrature) {
    TemperedStableDensity d{1.0, 0.5, 0.7, 2.0, 3.0, 5.0};
    auto nu = LevyMeasure::from_density(d, {0.1, 0.01, 0.001});
    for (std::size_t m = 1; m <= 3; ++m) {
        const double a = nu.cutoff(m);
        auto dens = [&](double c, double lam) {
            return [=](double z) { return c * std::pow(z, -1.0 - d.alpha) * std::exp(-lam * z); };
        };
        auto pos = dens(d.c_pos, d.decay_pos), neg = dens(d.c_neg, d.decay_neg);
        const double mass = simpson_log(a, d.z_max, pos) + simpson_log(a, d.z_max, neg);
        const double m2 = simpson_log(a, d.z_max, [&](double z) { return z * z * pos(z); }) +
                          simpson_log(a, d.z_max, [&](double z) { return z * z * neg(z); });
        EXPECT_NEAR(nu.mass(m).value, mass, 1e-8 * mass) << "m=" << m;
        EXPECT_NEAR(nu.integrate([](double z) { return z * z; }, m).value, m2, 1e-8 * m2) << "m=" << m;
    }
}

TEST(LevyMeasure, TruncatedSetsIncrease) {
    TemperedStableDensity d{1.0, 1.0, 0.5, 1.0, 1.0, 4.0};
    auto nu = LevyMeasure::from_density(d, {0.5, 0.05, 0.005});
    EXPECT_LT(nu.mass(1).value, nu.mass(2).value);
    EXPECT_LT(nu.mass(2).value, nu.mass(3).value);
    EXPECT_TRUE(nu.in_set(0.06, 2));
    EXPECT_FALSE(nu.in_set(0.06, 1));
    EXPECT_FALSE(nu.in_set(0.0, 3));
    const double full = nu.second_moment();
    EXPECT_LT(nu.integrate([](double z) { return z * z; }, 3).value, full);
}

TEST(LevyMeasure, SampledMarksFollowDensity) {
    TemperedStableDensity d{1.0, 0.0, 0.5, 1.0, 1.0, 4.0};
    auto nu = LevyMeasure::from_density(d, {0.05});
    const double mean = nu.integrate([](double z) { return z; }, 1).value / nu.mass(1).value;
    auto rng = make_engine(4, Stream::aux);
    RunningStats s;
    for (int k = 0; k < 100000; ++k) s.add(nu.sample_mark(rng, 1));
    EXPECT_NEAR(s.mean(), mean, 4.0 * s.std_error());
}

TEST(LevyMeasure, RejectsInvalidInput) {
    EXPECT_THROW(LevyMeasure::from_atoms({{0.0, 1.0}}), ConfigurationError);
    EXPECT_THROW(LevyMeasure::from_atoms({{0.1, -1.0}}), ConfigurationError);
    TemperedStableDensity d;
    EXPECT_THROW(LevyMeasure::from_density(d, {0.01, 0.1}), ConfigurationError);
    d.alpha = 2.0;
    EXPECT_THROW(LevyMeasure::from_density(d, {0.1}), ConfigurationError);
    auto nu = LevyMeasure::from_atoms({{0.1, 1.0}});
    EXPECT_THROW(nu.cutoff(2), ConfigurationError);
}

TEST(PoissonMeasure, CountMeanIsIntensityTimesHorizon) {
    auto nu = LevyMeasure::from_atoms({{-0.2, 1.5}, {0.3, 0.5}});
    TimeGrid g(2.0, 40);
    RunningStats s;
    for (std::uint64_t p = 0; p < 50000; ++p) {
        const auto marks = simulate_poisson_measure(g, nu, 1, path_seed(5, p));
        s.add(static_cast<double>(marks.size()));
        for (const auto& m : marks) {
            ASSERT_GT(m.time, 0.0);
            ASSERT_LE(m.time, 2.0);
            ASSERT_EQ(m.node, g.snap_right(m.time));
        }
    }
    EXPECT_NEAR(s.mean(), 4.0, 4.0 * s.std_error());
    EXPECT_NEAR(s.variance(), 4.0, 0.1);
}

TEST(PoissonMeasure, IndependentOfWiener) {
    auto nu = LevyMeasure::from_atoms({{0.3, 2.0}});
    TimeGrid g(1.0, 20);
    RunningStats xy, x, y;
    for (std::uint64_t p = 0; p < 50000; ++p) {
        auto path = simulate_scenario(g, nu, 1, NoDefault{}, path_seed(6, p));
        const double w = path.wiener_path().back();
        const double n = static_cast<double>(path.poisson_marks.size());
        x.add(w);
        y.add(n);
        xy.add(w * n);
    }
    const double cov = xy.mean() - x.mean() * y.mean();
    EXPECT_NEAR(cov, 0.0, 4.0 * std::sqrt(2.0 / 50000.0));
}

TEST(DefaultMechanism, IndependentSurvivalProbability) {
    TimeGrid g(1.0, 100);
    const double lambda = 0.7;
    const int n = 100000;
    int survived = 0;
    for (int p = 0; p < n; ++p) {
        ScenarioPath path(g);
        auto d = simulate_default(g, IndependentIntensity::constant(g, lambda), path, path_seed(7, p));
        survived += d.empty();
    }
    const double expected = std::pow(1.0 - lambda * g.dt(), 100);
    const double phat = static_cast<double>(survived) / n;
    EXPECT_NEAR(phat, expected, 4.0 * std::sqrt(expected * (1 - expected) / n));
}

TEST(DefaultMechanism, AfterDefaultJumpsOnce) {
    TimeGrid g(1.0, 50);
    for (int p = 0; p < 200; ++p) {
        ScenarioPath path(g);
        auto d = simulate_default(g, AfterDefaultRegime::constant(g, 5.0), path, path_seed(8, p));
        ASSERT_LE(d.size(), 1u);
    }
}

TEST(DefaultMechanism, ThinningRejectsLargeRates) {
    TimeGrid g(1.0, 10);
    ScenarioPath path(g);
    EXPECT_THROW(simulate_default(g, IndependentIntensity::constant(g, 20.0), path, 1), ConfigurationError);
    EXPECT_THROW(simulate_default(g, IndependentIntensity::constant(g, -1.0), path, 1), ConfigurationError);
    EXPECT_THROW(simulate_default(g, IndependentIntensity{{1.0, 2.0}}, path, 1), ConfigurationError);
}

TEST(DefaultMechanism, WindowTriggerMatchesContinuousTimeOracle) {
    const double gamma = 1.0, eps = 0.1;
    // Oracle: continuous-time events on (0, 1 + eps]; tau <= 1 iff two consecutive
    // events lie closer than 2 eps with the later one before 1 + eps.
    std::mt19937_64 rng(12345);
    std::exponential_distribution<double> gap(gamma);
    const int n_oracle = 1000000;
    int hit_oracle = 0;
    for (int p = 0; p < n_oracle; ++p) {
        double prev = -1.0, t = 0.0;
        for (;;) {
            t += gap(rng);
            if (t > 1.0 + eps) break;
            if (prev >= 0.0 && t - prev < 2.0 * eps) {
                ++hit_oracle;
                break;
            }
            prev = t;
        }
    }
    const double p_oracle = static_cast<double>(hit_oracle) / n_oracle;

    TimeGrid g(1.0, 1000);
    auto nu = LevyMeasure::from_atoms({{1.0, gamma}});
    WindowTrigger trig{eps, 2};
    const int n = 100000;
    int hit = 0;
    for (int p = 0; p < n; ++p) {
        ScenarioPath path(g);
        path.poisson_marks = simulate_poisson_measure(g, nu, 1, path_seed(9, p));
        path.lookahead_marks = simulate_poisson_lookahead(g, nu, 1, 100, path_seed(9, p));
        hit += !simulate_default(g, trig, path, path_seed(9, p)).empty();
    }
    const double phat = static_cast<double>(hit) / n;
    const double se = std::sqrt(p_oracle * (1 - p_oracle) * (1.0 / n + 1.0 / n_oracle));
    EXPECT_NEAR(phat, p_oracle, 4.0 * se + 0.003);
}

TEST(DefaultMechanism, WindowTriggerEpsilonMustBeMultipleOfDt) {
    TimeGrid g(1.0, 100);
    EXPECT_THROW(lookahead_steps(g, WindowTrigger{0.005, 2}), ConfigurationError);
    EXPECT_THROW(lookahead_steps(g, WindowTrigger{0.015, 2}), ConfigurationError);
    EXPECT_EQ(lookahead_steps(g, WindowTrigger{0.1, 2}), 10u);
    EXPECT_EQ(lookahead_steps(g, IndependentIntensity::constant(g, 0.1)), 0u);
}

TEST(DefaultMechanism, WindowTriggerDeterministicCase) {
    TimeGrid g(1.0, 10);
    ScenarioPath path(g);
    path.poisson_marks = {{3, 0.25, 1.0}, {4, 0.35, 1.0}};
    // window at node j covers nodes j-0 .. j+1 for eps = dt; both marks fall in node 3's window
    auto d = simulate_default(g, WindowTrigger{0.1, 2}, path, 0);
    ASSERT_EQ(d.size(), 1u);
    // trigger node 3 coincides with a mark and is shifted past nodes 3 and 4
    EXPECT_EQ(d[0], 5u);
}

TEST(Coincidences, ShiftPastMarksAndKeepOrder) {
    TimeGrid g(1.0, 10);
    std::vector<PoissonMark> marks{{2, 0.15, 1.0}, {3, 0.25, 1.0}};
    EXPECT_EQ(resolve_coincidences(g, marks, {2}), (std::vector<std::size_t>{4}));
    EXPECT_EQ(resolve_coincidences(g, marks, {0}), (std::vector<std::size_t>{1}));
    EXPECT_EQ(resolve_coincidences(g, marks, {4, 4}), (std::vector<std::size_t>{4, 5}));
    EXPECT_EQ(resolve_coincidences(g, {{10, 1.0, 1.0}}, {10}), (std::vector<std::size_t>{}));
}

TEST(Scenario, JointDrawIsReproducible) {
    TimeGrid g(1.0, 50);
    auto nu = LevyMeasure::from_atoms({{0.2, 3.0}});
    auto a = simulate_scenario(g, nu, 1, IndependentIntensity::constant(g, 2.0), 77);
    auto b = simulate_scenario(g, nu, 1, IndependentIntensity::constant(g, 2.0), 77);
    EXPECT_EQ(a.wiener_increments, b.wiener_increments);
    EXPECT_EQ(a.default_nodes, b.default_nodes);
    ASSERT_EQ(a.poisson_marks.size(), b.poisson_marks.size());
    for (std::size_t k = 0; k < a.poisson_marks.size(); ++k) EXPECT_EQ(a.poisson_marks[k].z, b.poisson_marks[k].z);
    for (std::size_t d : a.default_nodes) {
        for (const auto& m : a.poisson_marks) EXPECT_NE(d, m.node);
    }
}

TEST(Scenario, CountsAndCoarsening) {
    TimeGrid g(1.0, 8);
    ScenarioPath path(g);
    path.wiener_increments = {1, 2, 3, 4, 5, 6, 7, 8};
    path.poisson_marks = {{3, 0.3, 1.0}, {3, 0.33, 2.0}, {8, 0.99, 1.0}};
    path.default_nodes = {5};
    EXPECT_EQ(path.mark_counts()[3], 2u);
    EXPECT_EQ(path.default_counts(), (std::vector<std::size_t>{0, 0, 0, 0, 0, 1, 1, 1, 1}));
    auto c = coarsen(path, 4);
    EXPECT_EQ(c.wiener_increments, (std::vector<double>{10, 26}));
    EXPECT_EQ(c.poisson_marks[0].node, 1u);
    EXPECT_EQ(c.poisson_marks[2].node, 2u);
    EXPECT_EQ(c.default_nodes, (std::vector<std::size_t>{2}));
    EXPECT_THROW(coarsen(path, 3), ConfigurationError);
}

TEST(InformationFlow, ContainmentAndKinds) {
    auto full = InformationFlow::full();
    auto part = InformationFlow::partial({Observable::default_count});
    auto ant = InformationFlow::anticipating({Observable::poisson_forward}, 5);
    EXPECT_TRUE(part.contained_in(full));
    EXPECT_TRUE(full.contained_in(ant));
    EXPECT_FALSE(ant.contained_in(full));
    EXPECT_EQ(full.dimension(), 3u);
    EXPECT_THROW(InformationFlow::partial({Observable::poisson_forward}), ConfigurationError);
    EXPECT_THROW(InformationFlow::full({Observable::wiener_forward_sign}), ConfigurationError);
    EXPECT_THROW(InformationFlow::full({}, 0), ConfigurationError);
    EXPECT_THROW(observable_from_string("nope"), ConfigurationError);
}

TEST(InformationFlow, AdaptedStatesIgnoreTheFuture) {
    TimeGrid g(1.0, 20);
    auto nu = LevyMeasure::from_atoms({{0.2, 5.0}});
    auto path = simulate_scenario(g, nu, 1, IndependentIntensity::constant(g, 3.0), 31);
    auto flow = InformationFlow::full({Observable::window_count}, 4);
    auto before = flow.states(path);
    auto changed = path;
    for (std::size_t i = 10; i < 20; ++i) changed.wiener_increments[i] += 1.0;
    changed.poisson_marks.push_back({15, 0.74, 0.2});
    changed.default_nodes.push_back(18);
    auto after = flow.states(changed);
    for (std::size_t k = 0; k <= 10; ++k) EXPECT_EQ(before[k], after[k]) << "node " << k;
}

TEST(InformationFlow, AnticipatingStatesSeeAhead) {
    TimeGrid g(1.0, 10);
    ScenarioPath path(g);
    path.poisson_marks = {{4, 0.35, 1.0}};
    path.lookahead_marks = {{11, 1.05, 1.0}};
    auto flow = InformationFlow::anticipating({Observable::poisson_forward}, 2);
    auto s = flow.states(path);
    EXPECT_EQ(s[2][3], 1.0);
    EXPECT_EQ(s[4][3], 0.0);
    EXPECT_EQ(s[9][3], 1.0);
    EXPECT_EQ(s[10][3], 1.0);
}
