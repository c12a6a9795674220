#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fwdopt/errors.hpp"
#include "fwdopt/forward_calculus.hpp"
#include "fwdopt/information_flow.hpp"
#include "fwdopt/market_model.hpp"
#include "fwdopt/parallel.hpp"
#include "fwdopt/scenario.hpp"
#include "fwdopt/statistics.hpp"
#include "fwdopt/utility.hpp"

namespace fwdopt {

// ---------------------------------------------------------------------------
// Criterion process
// ---------------------------------------------------------------------------

struct CriterionPath {
    std::vector<double> m_pi;     ///< M_pi(t_k), stopped at tau
    double marginal = 0.0;        ///< U'(X(T)) X(T), before normalization
    double terminal_wealth = 0.0;
    std::size_t tau_node = 0;
};

/// M_pi = drift + forward W integral + compensated-jump integral + H integral, all on [0, t ^ tau].
inline CriterionPath build_criterion(const PortfolioProcess& pi, const ModelCoefficients& c, const ScenarioPath& path,
                                     const StopResult& stop, const Utility& utility, double x0 = 1.0) {
    const TimeGrid& grid = path.grid;
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();
    const WealthPath wealth = evaluate_wealth(pi, c, path, stop, x0);
    const auto defaulted = detail::defaulted_before(path);
    const MarkQuadrature& rule = c.mark_rule();

    Integrand sigma{std::vector<double>(n, 0.0), Measurability::grid_adapted};
    Integrand h_weight{std::vector<double>(n, 0.0), Measurability::grid_adapted};
    std::vector<double> drift(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        if (i < stop.node) {
            const CoefficientValues v = c.at(i, defaulted[i]);
            const double p = pi.values[i];
            double jump = 0.0;
            if (c.has_marks()) {
                jump = rule.integrate([&](double z) {
                    const double th = c.theta(i, defaulted[i], z);
                    return p * th * th / (1.0 + p * th);
                });
            }
            d = (v.mu - v.rho - p * v.sigma * v.sigma - jump) * dt;
            sigma.values[i] = v.sigma;
            h_weight.values[i] = v.kappa / (1.0 + v.kappa * p);
        }
        drift[i + 1] = drift[i] + d;
    }
    const auto w_int = forward_integral_w(sigma, path);
    const auto h_int = integral_h(h_weight, path);
    std::vector<double> n_int(n + 1, 0.0);
    if (c.has_marks()) {
        const MarkIntegrand u = [&](std::size_t i, double z) {
            if (i >= stop.node) return 0.0;
            const double th = c.theta(i, defaulted[i], z);
            return th / (1.0 + pi.values[i] * th);
        };
        n_int = forward_integral_poisson(u, path, c.nu, c.truncation_index).path_values;
    }
    CriterionPath out;
    out.m_pi.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) out.m_pi[k] = drift[k] + w_int.path_values[k] + n_int[k] + h_int[k];
    out.terminal_wealth = wealth.terminal;
    out.marginal = utility.marginal_wealth(wealth.terminal);
    out.tau_node = stop.node;
    return out;
}

/// F_pi(T): marginals divided by their sample mean, so the weights average to 1.
inline std::vector<double> normalize_weights(const std::vector<double>& marginal) {
    CompensatedSum s;
    for (double m : marginal) s.add(m);
    const double mean = s.value() / static_cast<double>(marginal.size());
    if (!(mean > 0.0) || !std::isfinite(mean)) throw NumericalError("criterion: E[U'(X) X] is not positive and finite");
    std::vector<double> out(marginal.size());
    for (std::size_t i = 0; i < marginal.size(); ++i) out[i] = marginal[i] / mean;
    return out;
}

// ---------------------------------------------------------------------------
// Martingale test
// ---------------------------------------------------------------------------

enum class AuditVerdict { pass, fail, inconclusive };

inline std::string to_string(AuditVerdict v) {
    switch (v) {
        case AuditVerdict::pass: return "pass";
        case AuditVerdict::fail: return "fail";
        case AuditVerdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

struct TestWindow {
    std::size_t t_node;
    std::size_t h_steps;
};

struct MartingaleCell {
    std::size_t t_node = 0;
    std::size_t h_steps = 0;
    int bucket = 0;
    std::size_t count = 0;
    double mean = 0.0;
    double std_error = 0.0;
    double z = 0.0;
    bool tested = false;
};

struct MartingaleAudit {
    std::vector<MartingaleCell> cells;
    double critical_z = 0.0;
    double max_abs_z = 0.0;
    double worst_z = 0.0;  ///< signed z of the largest |z|
    std::size_t tests = 0;
    AuditVerdict verdict = AuditVerdict::inconclusive;
};

/// E[F (M(t+h) - M(t)) | bucket] = 0 for every window and bucket, Bonferroni over all
/// tested cells. buckets[p][j] is path p's label at windows[j].t_node.
inline MartingaleAudit martingale_test(const std::vector<std::vector<double>>& m_paths,
                                       const std::vector<double>& weights, const std::vector<TestWindow>& windows,
                                       const std::vector<std::vector<int>>& buckets, double significance,
                                       std::size_t min_bucket = 100) {
    if (m_paths.size() != weights.size() || m_paths.size() != buckets.size()) {
        throw ConfigurationError("martingale test: path, weight and bucket counts differ");
    }
    if (!(significance > 0.0 && significance < 1.0)) throw ConfigurationError("martingale test: significance in (0, 1)");
    MartingaleAudit audit;
    bool undersized = false;
    for (std::size_t j = 0; j < windows.size(); ++j) {
        const TestWindow& w = windows[j];
        std::map<int, RunningStats> stats;
        for (std::size_t p = 0; p < m_paths.size(); ++p) {
            const auto& m = m_paths[p];
            if (w.t_node + w.h_steps >= m.size()) throw ConfigurationError("martingale test: window beyond the horizon");
            stats[buckets[p][j]].add(weights[p] * (m[w.t_node + w.h_steps] - m[w.t_node]));
        }
        for (const auto& [b, s] : stats) {
            MartingaleCell cell;
            cell.t_node = w.t_node;
            cell.h_steps = w.h_steps;
            cell.bucket = b;
            cell.count = s.count();
            cell.mean = s.mean();
            cell.std_error = s.count() > 1 ? s.std_error() : 0.0;
            cell.tested = s.count() >= min_bucket;
            if (!cell.tested) undersized = true;
            cell.z = z_score(cell.mean, 0.0, cell.std_error);
            audit.cells.push_back(cell);
        }
    }
    for (const auto& c : audit.cells) audit.tests += c.tested ? 1 : 0;
    audit.critical_z = bonferroni_critical_z(significance, std::max<std::size_t>(1, audit.tests));
    bool failed = false;
    for (const auto& c : audit.cells) {
        if (!c.tested) continue;
        if (std::abs(c.z) > audit.max_abs_z) {
            audit.max_abs_z = std::abs(c.z);
            audit.worst_z = c.z;
        }
        if (std::abs(c.z) > audit.critical_z) failed = true;
    }
    audit.verdict = failed ? AuditVerdict::fail : (undersized || audit.tests == 0 ? AuditVerdict::inconclusive
                                                                                   : AuditVerdict::pass);
    return audit;
}

/// Bucket labels from the flow state at each window's start node.
inline std::vector<int> bucket_labels(const InformationFlow& flow, const ScenarioPath& path,
                                      const std::vector<TestWindow>& windows,
                                      const std::function<int(const std::vector<double>&)>& bucketer) {
    const auto states = flow.states(path);
    std::vector<int> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(bucketer(states.at(w.t_node)));
    return out;
}

// ---------------------------------------------------------------------------
// Perturbations: Psi, concavity, uniqueness
// ---------------------------------------------------------------------------

struct PsiValue {
    double psi = 0.0;    ///< d/dy ln X_{pi + y beta}(T)
    double psi_y = 0.0;  ///< d^2/dy^2 ln X_{pi + y beta}(T)
};

/// Psi and Psi_y for the perturbed portfolio p = pi + y beta on one path.
inline PsiValue perturbation_kernel(const std::vector<double>& p, const std::vector<double>& beta,
                                    const ModelCoefficients& c, const ScenarioPath& path, const StopResult& stop) {
    const TimeGrid& grid = path.grid;
    const double dt = grid.dt();
    const auto defaulted = detail::defaulted_before(path);
    const auto marks = detail::marks_by_node(path, c);
    const auto defaults = detail::defaults_by_node(path);
    PsiValue out;
    for (std::size_t i = 0; i < stop.node; ++i) {
        const double b = beta[i];
        if (b == 0.0) continue;
        const CoefficientValues v = c.at(i, defaulted[i]);
        out.psi += b * (v.mu - v.rho - p[i] * v.sigma * v.sigma - v.theta_scale * c.theta_mark_mean()) * dt +
                   b * v.sigma * path.wiener_increments[i];
        out.psi_y -= b * b * v.sigma * v.sigma * dt;
        for (double z : marks[i + 1]) {
            const double th = c.theta(i, defaulted[i], z);
            const double den = 1.0 + p[i] * th;
            out.psi += b * th / den;
            out.psi_y -= b * b * th * th / (den * den);
        }
        for (std::size_t d = 0; d < defaults[i + 1]; ++d) {
            const double den = 1.0 + p[i] * v.kappa;
            out.psi += b * v.kappa / den;
            out.psi_y -= b * b * v.kappa * v.kappa / (den * den);
        }
    }
    return out;
}

/// Largest delta with margins >= floor for every |y| < delta along all paths' segments.
inline double perturbation_cap(const std::vector<std::vector<double>>& pi, const std::vector<std::vector<double>>& beta,
                               const ModelCoefficients& c, const std::vector<ScenarioPath>& paths, double floor = 1e-3) {
    double delta = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const auto defaulted = detail::defaulted_before(paths[p]);
        std::vector<std::vector<double>> realized(paths[p].grid.n_nodes());
        if (c.has_marks()) {
            for (const auto& m : paths[p].poisson_marks) realized[m.node].push_back(m.z);
        }
        for (std::size_t i = 0; i < pi[p].size(); ++i) {
            const double b = beta[p][i];
            auto bound = [&](double slope) {
                // 1 + (pi + y b) slope >= floor
                const double base = 1.0 + pi[p][i] * slope - floor;
                const double rate = b * slope;
                if (base < 0.0) {
                    delta = 0.0;
                } else if (rate != 0.0) {
                    delta = std::min(delta, base / std::abs(rate));
                }
            };
            bound(c.at(i, defaulted[i]).kappa);
            for (double z : c.margin_support()) bound(c.theta(i, defaulted[i], z));
            for (double z : realized[i + 1]) bound(c.theta(i, defaulted[i], z));
        }
    }
    return delta;
}

struct Ensemble {
    std::vector<ScenarioPath> paths;
    std::vector<StopResult> stops;
};

/// Simulates n paths (seeds master + index) and applies the stopping rule.
inline Ensemble simulate_ensemble(const TimeGrid& grid, const ModelCoefficients& c, const DefaultMechanism& mech,
                                  std::size_t n_paths, std::uint64_t master_seed, StoppingKind stopping,
                                  std::size_t workers = 1) {
    Ensemble e;
    e.paths.assign(n_paths, ScenarioPath(grid));
    e.stops.assign(n_paths, StopResult{grid.n_steps(), grid.horizon()});
    parallel_for(n_paths, workers, [&](std::size_t p) {
        e.paths[p] = simulate_scenario(grid, c.nu, c.truncation_index, mech, path_seed(master_seed, p));
        e.stops[p] = apply_stopping(stopping, e.paths[p], evaluate_asset(c, e.paths[p]));
    });
    return e;
}

struct ConcavityReport {
    double delta = 0.0;
    bool reduced_range = false;
    std::vector<double> y;
    std::vector<double> expected_utility;
    std::vector<double> expected_utility_se;
    std::vector<double> second_difference;     ///< at interior y points
    std::vector<double> second_difference_se;
    bool concave_within_noise = false;
    double derivative_fd = 0.0;                ///< central difference of E[U] at y = 0
    double derivative_fd_se = 0.0;
    double derivative_chain = 0.0;             ///< E[U'(X) X Psi(0)]
    double derivative_chain_se = 0.0;
    double psi_mean = 0.0;                     ///< E[Psi(0)]
    double psi_se = 0.0;
    double curvature_summand = 0.0;            ///< E[X Psi^2 (U''(X) X + U'(X))]
    double curvature_summand_se = 0.0;
    double psi_y_summand = 0.0;                ///< E[U'(X) X Psi_y]
    double psi_y_summand_se = 0.0;
    bool psi_y_negative = true;                ///< on every path where beta meets sigma != 0 before tau
    bool risk_aversion_condition = false;
};

namespace detail {

inline std::vector<double> perturbed(const std::vector<double>& pi, const std::vector<double>& beta, double y) {
    std::vector<double> out(pi.size());
    for (std::size_t i = 0; i < pi.size(); ++i) out[i] = pi[i] + y * beta[i];
    return out;
}

inline Policy sum_policy(const Policy& pi, const Policy& beta, double y) {
    return [pi, beta, y](std::size_t i, const std::vector<double>& s) { return pi(i, s) + y * beta(i, s); };
}

inline double certified_terminal(const Policy& policy, const InformationFlow& flow, const ModelCoefficients& c,
                                 const ScenarioPath& path, const StopResult& stop) {
    const AdmissibilityResult r = check_admissibility(policy, flow, c, path);
    if (!r.admissible()) {
        throw ContractViolation("perturbation left the admissible set: " + r.violations.front().message);
    }
    return evaluate_wealth(r.portfolio, c, path, stop).terminal;
}

}  // namespace detail

/// y -> E[U(X_{pi + y beta}(T))] on a uniform y grid with common random numbers, plus the
/// derivative chain at y = 0. Points outside the margin cap are dropped (reduced range).
inline ConcavityReport concavity_audit(const Ensemble& ens, const ModelCoefficients& c, const InformationFlow& flow,
                                       const Policy& pi, const Policy& beta, const Utility& utility,
                                       std::vector<double> y_grid, double fd_step = 1e-4, std::size_t workers = 1) {
    const std::size_t np = ens.paths.size();
    if (np < 2) throw ConfigurationError("concavity audit: need at least two paths");
    std::vector<std::vector<double>> pv(np), bv(np);
    for (std::size_t p = 0; p < np; ++p) {
        const auto states = flow.states(ens.paths[p]);
        const std::size_t n = ens.paths[p].grid.n_steps();
        pv[p].resize(n);
        bv[p].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            pv[p][i] = pi(i, states[i]);
            bv[p][i] = beta(i, states[i]);
        }
    }
    ConcavityReport rep;
    rep.risk_aversion_condition = utility.satisfies_risk_aversion_condition();
    rep.delta = perturbation_cap(pv, bv, c, ens.paths);
    const std::size_t before = y_grid.size();
    y_grid.erase(std::remove_if(y_grid.begin(), y_grid.end(), [&](double y) { return !(std::abs(y) < rep.delta); }),
                 y_grid.end());
    rep.reduced_range = y_grid.size() != before;
    if (fd_step >= rep.delta) {
        fd_step = 0.5 * rep.delta;
        rep.reduced_range = true;
    }
    rep.y = y_grid;

    const std::size_t ny = y_grid.size();
    // per path: U at each y, then U(+h), U(-h), chain terms
    std::vector<std::vector<double>> u(np, std::vector<double>(ny));
    std::vector<double> fd(np), chain(np), psi0(np), curv(np), psiy(np);
    std::vector<char> psi_ok(np, 1);
    parallel_for(np, workers, [&](std::size_t p) {
        const ScenarioPath& path = ens.paths[p];
        const StopResult& stop = ens.stops[p];
        for (std::size_t j = 0; j < ny; ++j) {
            u[p][j] = utility.value(detail::certified_terminal(detail::sum_policy(pi, beta, y_grid[j]), flow, c, path, stop));
        }
        const double up = utility.value(detail::certified_terminal(detail::sum_policy(pi, beta, fd_step), flow, c, path, stop));
        const double um = utility.value(detail::certified_terminal(detail::sum_policy(pi, beta, -fd_step), flow, c, path, stop));
        fd[p] = (up - um) / (2.0 * fd_step);
        const double x = detail::certified_terminal(pi, flow, c, path, stop);
        const PsiValue k = perturbation_kernel(pv[p], bv[p], c, path, stop);
        psi0[p] = k.psi;
        chain[p] = utility.d1(x) * x * k.psi;
        curv[p] = x * k.psi * k.psi * (utility.d2(x) * x + utility.d1(x));
        psiy[p] = utility.d1(x) * x * k.psi_y;
        // sign assertion only where beta meets sigma > 0 before tau
        const auto defaulted = detail::defaulted_before(path);
        bool applicable = false;
        for (std::size_t i = 0; i < stop.node; ++i) {
            if (bv[p][i] != 0.0 && c.at(i, defaulted[i]).sigma > 0.0) applicable = true;
        }
        psi_ok[p] = !applicable || k.psi_y < 0.0;
    });

    auto summarize_into = [&](const std::vector<double>& v, double& mean, double& se) {
        RunningStats s;
        for (double x : v) s.add(x);
        mean = s.mean();
        se = s.std_error();
    };
    rep.expected_utility.resize(ny);
    rep.expected_utility_se.resize(ny);
    for (std::size_t j = 0; j < ny; ++j) {
        RunningStats s;
        for (std::size_t p = 0; p < np; ++p) s.add(u[p][j]);
        rep.expected_utility[j] = s.mean();
        rep.expected_utility_se[j] = s.std_error();
    }
    rep.concave_within_noise = true;
    for (std::size_t j = 1; j + 1 < ny; ++j) {
        const double h1 = y_grid[j] - y_grid[j - 1];
        const double h2 = y_grid[j + 1] - y_grid[j];
        RunningStats s;
        for (std::size_t p = 0; p < np; ++p) {
            // non-uniform three-point second derivative
            s.add(2.0 * (h1 * u[p][j + 1] - (h1 + h2) * u[p][j] + h2 * u[p][j - 1]) / (h1 * h2 * (h1 + h2)));
        }
        rep.second_difference.push_back(s.mean());
        rep.second_difference_se.push_back(s.std_error());
        if (s.mean() > 3.0 * s.std_error()) rep.concave_within_noise = false;
    }
    summarize_into(fd, rep.derivative_fd, rep.derivative_fd_se);
    summarize_into(chain, rep.derivative_chain, rep.derivative_chain_se);
    summarize_into(psi0, rep.psi_mean, rep.psi_se);
    summarize_into(curv, rep.curvature_summand, rep.curvature_summand_se);
    summarize_into(psiy, rep.psi_y_summand, rep.psi_y_summand_se);
    rep.psi_y_negative = std::all_of(psi_ok.begin(), psi_ok.end(), [](char b) { return b != 0; });
    return rep;
}

enum class UniquenessVerdict { unique, degenerate, contradiction, inconclusive };

inline std::string to_string(UniquenessVerdict v) {
    switch (v) {
        case UniquenessVerdict::unique: return "unique";
        case UniquenessVerdict::degenerate: return "degenerate";
        case UniquenessVerdict::contradiction: return "contradiction";
        case UniquenessVerdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

struct UniquenessReport {
    std::vector<double> y;
    std::vector<double> derivative;     ///< d/dy E[U(X_{pi1 + y beta})] = E[U'(X) X Psi(0, beta, pi1 + y beta)]
    std::vector<double> derivative_se;
    std::vector<double> step_z;         ///< z of paired differences D(y_{j+1}) - D(y_j)
    bool strictly_decreasing = false;
    std::size_t crossings = 0;
    double crossing_y = std::numeric_limits<double>::quiet_NaN();
    double crossing_se = std::numeric_limits<double>::quiet_NaN();
    UniquenessVerdict verdict = UniquenessVerdict::inconclusive;
};

/// Derivative of expected utility along the segment pi1 + y (pi2 - pi1), y in [0, 1].
inline UniquenessReport uniqueness_probe(const Ensemble& ens, const ModelCoefficients& c, const InformationFlow& flow,
                                         const Policy& pi1, const Policy& pi2, const Utility& utility,
                                         const std::vector<double>& y_grid, double z_order = 2.0,
                                         std::size_t workers = 1) {
    const std::size_t np = ens.paths.size();
    const std::size_t ny = y_grid.size();
    if (np < 2 || ny < 2) throw ConfigurationError("uniqueness probe: need two paths and two y values");
    const Policy beta = [pi1, pi2](std::size_t i, const std::vector<double>& s) { return pi2(i, s) - pi1(i, s); };
    std::vector<std::vector<double>> d(np, std::vector<double>(ny));
    std::vector<char> nonzero(np, 0);
    parallel_for(np, workers, [&](std::size_t p) {
        const ScenarioPath& path = ens.paths[p];
        const auto states = flow.states(path);
        const std::size_t n = path.grid.n_steps();
        std::vector<double> p1(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            p1[i] = pi1(i, states[i]);
            b[i] = beta(i, states[i]);
            if (b[i] != 0.0) nonzero[p] = 1;
        }
        for (std::size_t j = 0; j < ny; ++j) {
            const double x = detail::certified_terminal(detail::sum_policy(pi1, beta, y_grid[j]), flow, c, path, ens.stops[p]);
            const PsiValue k = perturbation_kernel(detail::perturbed(p1, b, y_grid[j]), b, c, path, ens.stops[p]);
            d[p][j] = utility.d1(x) * x * k.psi;
        }
    });
    UniquenessReport rep;
    rep.y = y_grid;
    for (std::size_t j = 0; j < ny; ++j) {
        RunningStats s;
        for (std::size_t p = 0; p < np; ++p) s.add(d[p][j]);
        rep.derivative.push_back(s.mean());
        rep.derivative_se.push_back(s.std_error());
    }
    if (std::none_of(nonzero.begin(), nonzero.end(), [](char b) { return b != 0; })) {
        rep.verdict = UniquenessVerdict::degenerate;
        return rep;
    }
    bool ordered = true;
    rep.strictly_decreasing = true;
    for (std::size_t j = 0; j + 1 < ny; ++j) {
        RunningStats s;
        for (std::size_t p = 0; p < np; ++p) s.add(d[p][j + 1] - d[p][j]);
        const double z = z_score(s.mean(), 0.0, s.std_error());
        rep.step_z.push_back(z);
        if (!(s.mean() < 0.0)) rep.strictly_decreasing = false;
        if (!(z < -z_order)) ordered = false;
    }
    // sign changes among points whose sign is resolved
    int last_sign = 0;
    std::size_t last_j = 0;
    for (std::size_t j = 0; j < ny; ++j) {
        const double z = z_score(rep.derivative[j], 0.0, rep.derivative_se[j]);
        const int sign = z > z_order ? 1 : (z < -z_order ? -1 : 0);
        if (sign == 0) continue;
        if (last_sign != 0 && sign != last_sign) {
            ++rep.crossings;
            const double y0 = rep.y[last_j], y1 = rep.y[j];
            const double d0 = rep.derivative[last_j], d1 = rep.derivative[j];
            const double slope = (d1 - d0) / (y1 - y0);
            rep.crossing_y = y0 - d0 / slope;
            const double w = (rep.crossing_y - y0) / (y1 - y0);
            const double se = (1.0 - w) * rep.derivative_se[last_j] + w * rep.derivative_se[j];
            rep.crossing_se = se / std::abs(slope);
        }
        last_sign = sign;
        last_j = j;
    }
    if (rep.crossings > 1) {
        rep.verdict = UniquenessVerdict::contradiction;
    } else if (!ordered) {
        rep.verdict = UniquenessVerdict::inconclusive;
    } else {
        rep.verdict = UniquenessVerdict::unique;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Conditional expectations
// ---------------------------------------------------------------------------

enum class ConditionalMethod { bucket, polynomial };

struct ConditionalFit {
    ConditionalMethod method = ConditionalMethod::bucket;
    std::size_t degree = 0;
    double bin_width = 0.0;  ///< 0: exact state values
    std::map<std::vector<long long>, std::pair<double, double>> buckets;  ///< key -> (mean, s.e.)
    Eigen::VectorXd coefficients;
    std::vector<std::vector<unsigned>> monomials;
    double global_mean = 0.0;
    double global_se = 0.0;
    double cv_error = 0.0;  ///< mean squared out-of-fold prediction error
    std::string warning;

    double operator()(const std::vector<double>& state) const {
        if (method == ConditionalMethod::polynomial) {
            double acc = 0.0;
            for (std::size_t k = 0; k < monomials.size(); ++k) acc += coefficients[static_cast<Eigen::Index>(k)] * monomial(state, monomials[k]);
            return acc;
        }
        const auto it = buckets.find(key(state, bin_width));
        return it == buckets.end() ? global_mean : it->second.first;
    }

    static std::vector<long long> key(const std::vector<double>& state, double width) {
        std::vector<long long> k(state.size());
        for (std::size_t i = 0; i < state.size(); ++i) {
            k[i] = width > 0.0 ? static_cast<long long>(std::floor(state[i] / width))
                               : static_cast<long long>(std::llround(state[i] * 1e9));
        }
        return k;
    }

    static double monomial(const std::vector<double>& s, const std::vector<unsigned>& powers) {
        double v = 1.0;
        for (std::size_t i = 0; i < powers.size(); ++i) v *= std::pow(s[i], static_cast<double>(powers[i]));
        return v;
    }
};

namespace detail {

inline std::vector<std::vector<unsigned>> monomials_up_to(std::size_t dim, std::size_t degree) {
    std::vector<std::vector<unsigned>> out{std::vector<unsigned>(dim, 0)};
    for (std::size_t d = 1; d <= degree; ++d) {
        std::vector<unsigned> p(dim, 0);
        // enumerate compositions of d into dim parts
        std::function<void(std::size_t, unsigned)> rec = [&](std::size_t i, unsigned left) {
            if (i + 1 == dim) {
                p[i] = left;
                out.push_back(p);
                return;
            }
            for (unsigned k = left + 1; k-- > 0;) {
                p[i] = k;
                rec(i + 1, left - k);
            }
        };
        if (dim > 0) rec(0, static_cast<unsigned>(d));
    }
    return out;
}

inline ConditionalFit fit_bucket(const std::vector<double>& values, const std::vector<std::vector<double>>& states,
                                 const std::vector<std::size_t>& rows, double width) {
    ConditionalFit fit;
    fit.method = ConditionalMethod::bucket;
    fit.bin_width = width;
    std::map<std::vector<long long>, RunningStats> acc;
    RunningStats all;
    for (std::size_t r : rows) {
        acc[ConditionalFit::key(states[r], width)].add(values[r]);
        all.add(values[r]);
    }
    for (const auto& [k, s] : acc) fit.buckets[k] = {s.mean(), s.count() > 1 ? s.std_error() : 0.0};
    fit.global_mean = all.mean();
    fit.global_se = all.count() > 1 ? all.std_error() : 0.0;
    return fit;
}

inline std::optional<ConditionalFit> fit_polynomial(const std::vector<double>& values,
                                                    const std::vector<std::vector<double>>& states,
                                                    const std::vector<std::size_t>& rows, std::size_t degree) {
    ConditionalFit fit;
    fit.method = ConditionalMethod::polynomial;
    fit.degree = degree;
    fit.monomials = monomials_up_to(states.front().size(), degree);
    const auto cols = static_cast<Eigen::Index>(fit.monomials.size());
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), cols);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    RunningStats all;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (Eigen::Index k = 0; k < cols; ++k) {
            X(static_cast<Eigen::Index>(r), k) = ConditionalFit::monomial(states[rows[r]], fit.monomials[static_cast<std::size_t>(k)]);
        }
        y[static_cast<Eigen::Index>(r)] = values[rows[r]];
        all.add(values[rows[r]]);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < cols) return std::nullopt;
    fit.coefficients = qr.solve(y);
    fit.global_mean = all.mean();
    fit.global_se = all.count() > 1 ? all.std_error() : 0.0;
    return fit;
}

}  // namespace detail

struct ConditionalOptions {
    ConditionalMethod method = ConditionalMethod::bucket;
    std::size_t degree = 2;
    double bin_width = 0.0;
    std::size_t folds = 5;
};

/// E[value | state] by buckets or least-squares polynomial; k-fold CV error reported.
/// A rank-deficient design falls back to buckets with a warning.
inline ConditionalFit estimate_conditional(const std::vector<double>& values,
                                           const std::vector<std::vector<double>>& states,
                                           const ConditionalOptions& opt = {}) {
    if (values.size() != states.size() || values.empty()) {
        throw ConfigurationError("conditional estimate: values and states must be non-empty and aligned");
    }
    const std::size_t n = values.size();
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;

    ConditionalMethod method = opt.method;
    std::string warning;
    std::optional<ConditionalFit> fit;
    if (method == ConditionalMethod::polynomial) {
        fit = detail::fit_polynomial(values, states, all, opt.degree);
        if (!fit) {
            warning = "rank-deficient regression, fell back to buckets";
            method = ConditionalMethod::bucket;
        }
    }
    if (method == ConditionalMethod::bucket) fit = detail::fit_bucket(values, states, all, opt.bin_width);

    const std::size_t folds = std::min(std::max<std::size_t>(2, opt.folds), n);
    CompensatedSum sq;
    std::size_t counted = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < n; ++i) (i % folds == f ? test : train).push_back(i);
        if (train.empty() || test.empty()) continue;
        std::optional<ConditionalFit> part;
        if (method == ConditionalMethod::polynomial) part = detail::fit_polynomial(values, states, train, opt.degree);
        if (!part) part = detail::fit_bucket(values, states, train, opt.bin_width);
        for (std::size_t i : test) {
            const double e = (*part)(states[i]) - values[i];
            sq.add(e * e);
            ++counted;
        }
    }
    fit->cv_error = counted ? sq.value() / static_cast<double>(counted) : 0.0;
    fit->warning = warning;
    return *fit;
}

// ---------------------------------------------------------------------------
// Anticipating example: compensators and drift
// ---------------------------------------------------------------------------

struct HazardEstimate {
    std::size_t observations = 0;
    std::size_t events = 0;
    double rate = 0.0;
    double std_error = 0.0;
    double formula = 0.0;
    bool conclusive = false;
};

struct CompensatorReport {
    double gamma = 0.0;
    double epsilon = 0.0;
    HazardEstimate lambda_n[2];  ///< N-intensity by window state 0 / 1
    HazardEstimate lambda_h[2];  ///< H-intensity by window state 0 / 1
};

/// Empirical hazards of N and H on (t, t + dt] given tau > t and the trailing window
/// count N(t) - N(t - eps) in {0, 1}, for N Poisson(gamma) and the window trigger.
inline CompensatorReport compensator_estimate(double gamma, double epsilon, const TimeGrid& grid, std::size_t n_paths,
                                              std::uint64_t master_seed, std::size_t workers = 1,
                                              std::size_t min_observations = 1000) {
    if (!(gamma > 0.0)) throw ConfigurationError("compensator estimate: gamma must be positive");
    const LevyMeasure nu = LevyMeasure::from_atoms({{1.0, gamma}});
    const WindowTrigger trig{epsilon, 2};
    const std::size_t w = lookahead_steps(grid, trig);
    struct Counts {
        std::size_t obs[2] = {0, 0};
        std::size_t n_events[2] = {0, 0};
        std::size_t h_events[2] = {0, 0};
    };
    std::vector<Counts> per(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t p) {
        const ScenarioPath path = simulate_scenario(grid, nu, 1, trig, path_seed(master_seed, p));
        const std::size_t tau = path.default_nodes.empty() ? grid.n_steps() + 1 : path.default_nodes.front();
        const auto marks = path.mark_counts();
        std::vector<std::size_t> cum(marks.size(), 0);
        for (std::size_t k = 0; k < marks.size(); ++k) cum[k] = marks[k] + (k ? cum[k - 1] : 0);
        Counts& c = per[p];
        for (std::size_t k = 0; k < grid.n_steps() && k < tau; ++k) {
            const std::size_t lo = k >= w ? k - w : 0;
            const std::size_t state = cum[k] - cum[lo];
            if (state > 1) continue;
            ++c.obs[state];
            c.n_events[state] += marks[k + 1];
            c.h_events[state] += tau == k + 1 ? 1 : 0;
        }
    });
    Counts total;
    for (const auto& c : per) {
        for (int s = 0; s < 2; ++s) {
            total.obs[s] += c.obs[s];
            total.n_events[s] += c.n_events[s];
            total.h_events[s] += c.h_events[s];
        }
    }
    CompensatorReport rep;
    rep.gamma = gamma;
    rep.epsilon = epsilon;
    const double dt = grid.dt();
    const double formula_n[2] = {gamma / (1.0 + gamma * epsilon), 0.0};
    const double formula_h[2] = {gamma * gamma * epsilon / (1.0 + gamma * epsilon), gamma};
    auto make = [&](std::size_t obs, std::size_t events, double formula) {
        HazardEstimate h;
        h.observations = obs;
        h.events = events;
        h.formula = formula;
        h.conclusive = obs >= min_observations;
        if (obs > 0) {
            const double p = static_cast<double>(events) / static_cast<double>(obs);
            h.rate = p / dt;
            h.std_error = std::sqrt(std::max(p * (1.0 - p), 1.0 / static_cast<double>(obs)) / static_cast<double>(obs)) / dt;
        }
        return h;
    };
    for (int s = 0; s < 2; ++s) {
        rep.lambda_n[s] = make(total.obs[s], total.n_events[s], formula_n[s]);
        rep.lambda_h[s] = make(total.obs[s], total.h_events[s], formula_h[s]);
    }
    return rep;
}

struct DriftBucket {
    int bucket = 0;
    std::size_t count = 0;
    double drift = 0.0;  ///< E[dW | state] / dt
    double std_error = 0.0;
};

/// Per-state drift of W under the flow: E[W(t_{k+1}) - W(t_k) | bucket(state_k)] / dt,
/// pooled over nodes k whose look-ahead window stays inside [0, T].
inline std::vector<DriftBucket> semimartingale_drift(const std::vector<ScenarioPath>& paths,
                                                     const InformationFlow& flow,
                                                     const std::function<int(const std::vector<double>&)>& bucketer) {
    std::map<int, RunningStats> acc;
    for (const auto& path : paths) {
        const auto states = flow.states(path);
        const std::size_t n = path.grid.n_steps();
        const std::size_t reach = flow.kind() == FlowKind::anticipating ? flow.window_steps() : 0;
        const double dt = path.grid.dt();
        for (std::size_t k = 0; k + reach <= n && k < n; ++k) {
            acc[bucketer(states[k])].add(path.wiener_increments[k] / dt);
        }
    }
    std::vector<DriftBucket> out;
    for (const auto& [b, s] : acc) out.push_back({b, s.count(), s.mean(), s.count() > 1 ? s.std_error() : 0.0});
    return out;
}

}  // namespace fwdopt
