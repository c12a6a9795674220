#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fwdopt/errors.hpp"
#include "fwdopt/market_model.hpp"

namespace fwdopt {

struct JumpTerm {
    double theta;
    double weight;  ///< nu-mass carried by this mark
};

/// Log-utility first-order residual
///   g(pi) = (mu - rho) - sigma^2 pi - sum_j w_j pi theta_j^2 / (1 + pi theta_j) + kappa lambda / (1 + kappa pi),
/// strictly decreasing on its admissible interval.
struct FirstOrderCondition {
    double drift_excess = 0.0;
    double sigma2 = 0.0;
    std::vector<JumpTerm> jumps;
    double kappa = 0.0;
    double lambda = 0.0;

    static constexpr double kGuard = 1e-9;

    double theta_integral(double pi) const {
        double acc = 0.0;
        for (const auto& j : jumps) acc += j.weight * pi * j.theta * j.theta / (1.0 + pi * j.theta);
        return acc;
    }

    double default_term(double pi) const { return kappa * lambda / (1.0 + kappa * pi); }

    double residual(double pi) const { return drift_excess - sigma2 * pi - theta_integral(pi) + default_term(pi); }

    /// Open interval where 1 + pi theta_j > 0 for every mark and 1 + pi kappa > 0,
    /// shrunk by a relative guard.
    std::pair<double, double> admissible_interval() const {
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        auto limit = [&](double slope) {
            if (slope > 0.0) lo = std::max(lo, -1.0 / slope);
            if (slope < 0.0) hi = std::min(hi, -1.0 / slope);
        };
        for (const auto& j : jumps) {
            if (j.weight > 0.0) limit(j.theta);
        }
        limit(kappa);
        if (std::isfinite(lo)) lo += kGuard * std::max(1.0, std::abs(lo));
        if (std::isfinite(hi)) hi -= kGuard * std::max(1.0, std::abs(hi));
        if (!(lo < hi)) throw InfeasibleError("first-order condition: empty admissible interval");
        return {lo, hi};
    }

    /// Build from coefficient values; jump terms come from the coefficients' mark rule.
    static FirstOrderCondition from_coefficients(const ModelCoefficients& c, std::size_t interval, bool defaulted,
                                                 double lambda) {
        const CoefficientValues v = c.at(interval, defaulted);
        FirstOrderCondition foc;
        foc.drift_excess = v.mu - v.rho;
        foc.sigma2 = v.sigma * v.sigma;
        foc.kappa = v.kappa;
        foc.lambda = lambda;
        if (c.has_marks()) {
            const MarkQuadrature& q = c.mark_rule();
            for (std::size_t j = 0; j < q.z.size(); ++j) {
                foc.jumps.push_back({c.theta(interval, defaulted, q.z[j]), q.weight[j]});
            }
        }
        return foc;
    }
};

enum class RootVerdict { interior, boundary_lower, boundary_upper };

inline std::string to_string(RootVerdict v) {
    switch (v) {
        case RootVerdict::interior: return "interior";
        case RootVerdict::boundary_lower: return "no interior root, supremum at lower boundary";
        case RootVerdict::boundary_upper: return "no interior root, supremum at upper boundary";
    }
    return "unknown";
}

struct RootResult {
    double pi = 0.0;
    RootVerdict verdict = RootVerdict::interior;
    double residual = 0.0;
    int iterations = 0;
};

/// Bracketing root of the decreasing residual: bisection, then safeguarded secant.
/// When g keeps one sign on the admissible interval the boundary is reported, not clamped.
inline RootResult solve_general(const FirstOrderCondition& foc, double tol = 1e-13) {
    auto [lo, hi] = foc.admissible_interval();
    constexpr double kFar = 1e12;
    RootResult r;
    // g identically zero (riskless market): every pi is stationary, report 0
    const bool no_jumps =
        std::all_of(foc.jumps.begin(), foc.jumps.end(), [](const JumpTerm& j) { return j.theta == 0.0 || j.weight == 0.0; });
    if (foc.sigma2 == 0.0 && no_jumps && foc.kappa * foc.lambda == 0.0 && foc.drift_excess == 0.0) {
        return {0.0, RootVerdict::interior, 0.0, 0};
    }
    // bracket: [a, b] with g(a) > 0 > g(b)
    double a = std::isfinite(lo) ? lo : std::min(-1.0, std::isfinite(hi) ? hi - 1.0 : -1.0);
    double b = std::isfinite(hi) ? hi : std::max(1.0, std::isfinite(lo) ? lo + 1.0 : 1.0);
    double ga = foc.residual(a);
    double gb = foc.residual(b);
    while (ga < 0.0 && !std::isfinite(lo) && a > -kFar) {
        a = 2.0 * a - 1.0;
        ga = foc.residual(a);
    }
    while (gb > 0.0 && !std::isfinite(hi) && b < kFar) {
        b = 2.0 * b + 1.0;
        gb = foc.residual(b);
    }
    if (ga == 0.0) return {a, RootVerdict::interior, 0.0, 0};
    if (gb == 0.0) return {b, RootVerdict::interior, 0.0, 0};
    if (ga < 0.0) return {a, RootVerdict::boundary_lower, ga, 0};
    if (gb > 0.0) return {b, RootVerdict::boundary_upper, gb, 0};

    int it = 0;
    while (it < 200 && (b - a) > 1e-6 * std::max(1.0, std::abs(a) + std::abs(b))) {
        const double m = 0.5 * (a + b);
        const double gm = foc.residual(m);
        ++it;
        if (gm == 0.0) return {m, RootVerdict::interior, 0.0, it};
        if (gm > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
            gb = gm;
        }
    }
    double x = a - ga * (b - a) / (gb - ga);
    double gx = foc.residual(x);
    while (it < 300) {
        ++it;
        if (gx > 0.0) {
            a = x;
            ga = gx;
        } else {
            b = x;
            gb = gx;
        }
        const double scale = std::abs(foc.drift_excess) + foc.sigma2 * std::abs(x) + std::abs(foc.default_term(x)) +
                             std::abs(foc.theta_integral(x)) + 1e-300;
        if (std::abs(gx) <= tol * scale || b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x)) break;
        double next = a - ga * (b - a) / (gb - ga);
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        x = next;
        gx = foc.residual(x);
    }
    r.pi = x;
    r.residual = gx;
    r.iterations = it;
    return r;
}

/// Closed-form root of mu - rho - sigma^2 pi + kappa lambda / (1 + kappa pi) = 0 on the
/// branch with 1 + kappa pi > 0; reduces to (mu - rho) / sigma^2 when kappa = 0.
inline double solve_full_info(double mu, double rho, double sigma, double kappa, double lambda) {
    if (!(sigma > 0.0)) throw ConfigurationError("full-information solution: sigma must be positive");
    const double s2 = sigma * sigma;
    const double a = (mu - rho) / s2;
    if (kappa == 0.0 || lambda == 0.0) {
        const double pi = a;
        if (kappa != 0.0 && 1.0 + kappa * pi <= 0.0) {
            throw NumericalError("full-information solution: merton ratio violates the default margin");
        }
        return pi;
    }
    const double disc = (1.0 + kappa * a) * (1.0 + kappa * a) + 4.0 * lambda * kappa * kappa / s2;
    if (disc < 0.0) throw NumericalError("full-information solution: negative discriminant");
    const double root = std::sqrt(disc);
    const double ka1 = kappa * a - 1.0;
    const double pi = ka1 < 0.0 ? 2.0 * (a + lambda * kappa / s2) / (-ka1 + root) : (ka1 + root) / (2.0 * kappa);
    if (1.0 + kappa * pi <= 0.0) throw NumericalError("full-information solution: selected branch has kappa pi <= -1");
    return pi;
}

struct PartialInfoMoments {
    double c0;      ///< E[mu - rho + kappa lambda | G_t]
    double c1;      ///< E[(mu - rho) kappa - sigma^2 | G_t]
    double c2;      ///< E[sigma^2 kappa | G_t]
    double kappa;   ///< kappa(t), G_t-measurable

    static PartialInfoMoments deterministic(double mu, double rho, double sigma, double kappa, double lambda) {
        const double s2 = sigma * sigma;
        return {mu - rho + kappa * lambda, (mu - rho) * kappa - s2, s2 * kappa, kappa};
    }
};

/// Root of c0 + c1 pi - c2 pi^2 = 0 with 1 + kappa pi > 0.
inline double solve_partial_info(const PartialInfoMoments& m) {
    auto admissible = [&](double p) { return std::isfinite(p) && 1.0 + m.kappa * p > 1e-12; };
    const double scale = std::abs(m.c0) + std::abs(m.c1) + std::abs(m.c2);
    if (std::abs(m.c2) <= 1e-15 * scale) {
        if (m.c1 == 0.0) throw InfeasibleError("partial-information solution: degenerate polynomial");
        const double p = -m.c0 / m.c1;
        if (!admissible(p)) throw InfeasibleError("partial-information solution: linear root is not admissible");
        return p;
    }
    // -c2 pi^2 + c1 pi + c0 = 0
    const double A = -m.c2;
    const double B = m.c1;
    const double C = m.c0;
    const double disc = B * B - 4.0 * A * C;
    if (disc < 0.0) throw InfeasibleError("partial-information solution: no real root");
    const double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
    const double r1 = q / A;
    const double r2 = q != 0.0 ? C / q : r1;
    const bool ok1 = admissible(r1);
    const bool ok2 = admissible(r2);
    if (ok1 && ok2) {
        // impossible for a nonnegative intensity moment, where the residual is monotone
        throw InfeasibleError("partial-information solution: two roots satisfy the default margin");
    }
    if (ok1) return r1;
    if (ok2) return r2;
    throw InfeasibleError("partial-information solution: both roots violate the default margin");
}

struct AfterDefaultSolution {
    RootResult pre_default;
    RootResult post_default;
};

/// Pre-default regime includes the default term; after the (single) default it is absent.
inline AfterDefaultSolution solve_after_default(FirstOrderCondition regime1, FirstOrderCondition regime2) {
    regime2.kappa = 0.0;
    regime2.lambda = 0.0;
    return {solve_general(regime1), solve_general(regime2)};
}

enum class Figure1Model { uncompensated, compensated };

struct Figure1Point {
    double lambda;
    double pi;
};

/// pi*(lambda) with rho = 0: drift mu_o (uncompensated) or mu_o - lambda kappa (compensated).
inline std::vector<Figure1Point> figure1_sweep(Figure1Model model, double mu_o, double sigma, double kappa,
                                               const std::vector<double>& lambda_grid) {
    std::vector<Figure1Point> out;
    out.reserve(lambda_grid.size());
    for (double lambda : lambda_grid) {
        if (lambda < 0.0) throw ConfigurationError("figure1 sweep: lambda must be >= 0");
        const double mu = model == Figure1Model::uncompensated ? mu_o : mu_o - lambda * kappa;
        out.push_back({lambda, solve_full_info(mu, 0.0, sigma, kappa, lambda)});
    }
    return out;
}

struct OptimalPolicy {
    std::vector<double> values;
    std::vector<double> residuals;
    std::string method;
};

/// Node-wise full-information optimum along one path (log utility, theta = 0 uses the
/// closed form, otherwise the root finder). With a post-default regime the default
/// term is dropped once H >= 1; without one the pre-default condition applies throughout.
inline OptimalPolicy solve_along_path(const ModelCoefficients& c, const ScenarioPath& path,
                                      const std::vector<double>& lambda) {
    const std::size_t n = path.grid.n_steps();
    if (lambda.size() != n) throw ConfigurationError("optimal policy: lambda needs one value per interval");
    const auto defaulted = detail::defaulted_before(path);
    OptimalPolicy pol;
    pol.method = c.has_marks() ? "root_find_general" : "closed_form_full";
    pol.values.resize(n);
    pol.residuals.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        FirstOrderCondition foc = FirstOrderCondition::from_coefficients(c, i, defaulted[i], lambda[i]);
        if (defaulted[i] && c.post) {
            foc.kappa = 0.0;
            foc.lambda = 0.0;
        }
        double p;
        if (foc.jumps.empty() && foc.sigma2 > 0.0) {
            const CoefficientValues v = c.at(i, defaulted[i]);
            p = solve_full_info(v.mu, v.rho, v.sigma, foc.kappa, foc.lambda);
        } else {
            const RootResult r = solve_general(foc);
            if (r.verdict != RootVerdict::interior) {
                throw InfeasibleError("optimal policy: " + to_string(r.verdict) + " on interval " + std::to_string(i));
            }
            p = r.pi;
        }
        pol.values[i] = p;
        pol.residuals[i] = foc.residual(p);
    }
    return pol;
}

}  // namespace fwdopt
