#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fwdopt/errors.hpp"
#include "fwdopt/levy_measure.hpp"
#include "fwdopt/parallel.hpp"
#include "fwdopt/scenario.hpp"
#include "fwdopt/statistics.hpp"

namespace fwdopt {

enum class Measurability { elementary, grid_adapted, anticipating };

/// Grid integrand: values[i] acts on interval (t_i, t_{i+1}] and is fixed at t_i
/// (or, for anticipating integrands, by any information the caller used).
struct Integrand {
    std::vector<double> values;
    Measurability tag = Measurability::grid_adapted;

    static Integrand constant(const TimeGrid& grid, double c, Measurability tag = Measurability::elementary) {
        return {std::vector<double>(grid.n_steps(), c), tag};
    }

    /// Piecewise constant: coefficient j on the intervals between breakpoint nodes
    /// b_j and b_{j+1} (b_0 = 0, last breakpoint = n).
    static Integrand elementary(const TimeGrid& grid, const std::vector<std::size_t>& breakpoints,
                                const std::vector<double>& coefficients) {
        if (breakpoints.size() != coefficients.size() + 1 || breakpoints.front() != 0 ||
            breakpoints.back() != grid.n_steps() || !std::is_sorted(breakpoints.begin(), breakpoints.end())) {
            throw ConfigurationError("elementary integrand: need breakpoints 0 = b_0 <= ... <= b_k = n and k coefficients");
        }
        Integrand u{std::vector<double>(grid.n_steps(), 0.0), Measurability::elementary};
        for (std::size_t j = 0; j < coefficients.size(); ++j) {
            for (std::size_t i = breakpoints[j]; i < breakpoints[j + 1]; ++i) u.values[i] = coefficients[j];
        }
        return u;
    }
};

/// u(i, z): mark-dependent integrand on interval i.
using MarkIntegrand = std::function<double(std::size_t, double)>;

enum class ForwardScheme { riemann_forward, epsilon_limit };

struct EpsilonPoint {
    double epsilon;
    double terminal_value;
    double max_node_gap;  ///< max_k |I_eps(t_k) - I_riemann(t_k)|
};

struct ForwardIntegralResult {
    std::vector<double> path_values;  ///< I(t_k), k = 0..n, path_values[0] = 0
    ForwardScheme scheme = ForwardScheme::riemann_forward;
    std::vector<EpsilonPoint> convergence;

    double terminal() const { return path_values.back(); }
};

namespace detail {

inline void require_size(const Integrand& u, const TimeGrid& grid, const char* what) {
    if (u.values.size() != grid.n_steps()) {
        throw ConfigurationError(std::string(what) + ": integrand must have one value per grid interval");
    }
}

inline std::vector<double> riemann_w(const std::vector<double>& u, const std::vector<double>& dw) {
    std::vector<double> out(dw.size() + 1, 0.0);
    for (std::size_t i = 0; i < dw.size(); ++i) out[i + 1] = out[i] + u[i] * dw[i];
    return out;
}

}  // namespace detail

/// Forward integral against W.
///
/// riemann_forward: sum of u(t_i) (W(t_{i+1}) - W(t_i)), exact for elementary integrands.
/// epsilon_limit: left-point quadrature of u(s) (W(s + eps) - W(s)) / eps for every eps in
/// `epsilons` (integer multiples of dt, W frozen after T); path_values come from the last
/// entry and `convergence` lists every eps.
inline ForwardIntegralResult forward_integral_w(const Integrand& u, const ScenarioPath& path,
                                                ForwardScheme scheme = ForwardScheme::riemann_forward,
                                                const std::vector<double>& epsilons = {}) {
    detail::require_size(u, path.grid, "forward integral");
    ForwardIntegralResult result;
    result.scheme = scheme;
    const std::vector<double> riemann = detail::riemann_w(u.values, path.wiener_increments);
    if (scheme == ForwardScheme::riemann_forward) {
        result.path_values = riemann;
        return result;
    }
    if (epsilons.empty()) throw ConfigurationError("forward integral: epsilon_limit needs at least one epsilon");
    const std::vector<double> w = path.wiener_path();
    const std::size_t n = path.grid.n_steps();
    for (double eps : epsilons) {
        if (eps < path.grid.dt() * (1.0 - 1e-12)) throw ConfigurationError("forward integral: epsilon below dt");
        const std::size_t k = path.grid.steps_for(eps, "forward integral epsilon");
        std::vector<double> values(n + 1, 0.0);
        double gap = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double quotient = (w[std::min(i + k, n)] - w[i]) / static_cast<double>(k);
            values[i + 1] = values[i] + u.values[i] * quotient;
            gap = std::max(gap, std::abs(values[i + 1] - riemann[i + 1]));
        }
        result.convergence.push_back({eps, values.back(), gap});
        result.path_values = std::move(values);
    }
    return result;
}

struct PoissonIntegralResult {
    std::vector<double> path_values;          ///< compensated integral J(t_k) on U_m
    std::vector<double> terminal_by_truncation;  ///< J(T) on U_1 .. U_m
    double compensator_error_estimate = 0.0;
};

/// Sum of u(t-, z) over the path's marks in U_m, without compensation; cumulative per node.
inline std::vector<double> poisson_sum(const MarkIntegrand& u, const ScenarioPath& path, const LevyMeasure& nu,
                                       std::size_t truncation_index) {
    std::vector<double> out(path.grid.n_nodes(), 0.0);
    for (const auto& mark : path.poisson_marks) {
        if (mark.node == 0 || !nu.in_set(mark.z, truncation_index)) continue;
        out[mark.node] += u(mark.node - 1, mark.z);
    }
    for (std::size_t k = 1; k < out.size(); ++k) out[k] += out[k - 1];
    return out;
}

/// Forward integral against the compensated measure on U_m: the mark sum minus the
/// quadrature compensator dt * int_{U_m} u(i, z) nu(dz) per interval. The terminal value
/// is also reported for every coarser truncation U_1 .. U_{m-1}.
inline PoissonIntegralResult forward_integral_poisson(const MarkIntegrand& u, const ScenarioPath& path,
                                                      const LevyMeasure& nu, std::size_t truncation_index) {
    if (truncation_index > path.truncation_index && !path.poisson_marks.empty()) {
        throw ConfigurationError("poisson forward integral: path was generated on a coarser truncation set");
    }
    const TimeGrid& grid = path.grid;
    const double dt = grid.dt();
    PoissonIntegralResult result;
    for (std::size_t m = 1; m <= truncation_index; ++m) {
        const MarkQuadrature fine = nu.quadrature(m);
        const MarkQuadrature coarse = nu.has_density() ? nu.quadrature(m, LevyMeasure::kDefaultPanels / 2) : fine;
        std::vector<double> values = poisson_sum(u, path, nu, m);
        double compensator = 0.0;
        double err = 0.0;
        for (std::size_t i = 0; i < grid.n_steps(); ++i) {
            const double c = fine.integrate([&](double z) { return u(i, z); });
            if (!std::isfinite(c)) {
                throw ConfigurationError("poisson forward integral: compensator quadrature failed on interval " +
                                         std::to_string(i));
            }
            if (nu.has_density()) err += dt * std::abs(c - coarse.integrate([&](double z) { return u(i, z); }));
            compensator += dt * c;
            values[i + 1] -= compensator;
        }
        result.terminal_by_truncation.push_back(values.back());
        if (m == truncation_index) {
            result.path_values = std::move(values);
            result.compensator_error_estimate = err;
        }
    }
    if (result.path_values.empty()) result.path_values.assign(grid.n_nodes(), 0.0);
    return result;
}

/// Pathwise Stieltjes integral against H: sum of u(tau_j-) over jump nodes tau_j <= t_k.
inline std::vector<double> integral_h(const Integrand& u, const ScenarioPath& path) {
    detail::require_size(u, path.grid, "H integral");
    std::vector<double> out(path.grid.n_nodes(), 0.0);
    for (std::size_t d : path.default_nodes) out[d] += u.values[d - 1];
    for (std::size_t k = 1; k < out.size(); ++k) out[k] += out[k - 1];
    return out;
}

// ---------------------------------------------------------------------------
// Ito formula for forward integrals
// ---------------------------------------------------------------------------

/// dX = mu dt + sigma d^-W + int theta N~(d^-t, dz) + dzeta, where zeta jumps by
/// zeta_jump(t) at the jumps of H.
struct ItoDynamics {
    double x0 = 0.0;
    std::function<double(double)> mu = [](double) { return 0.0; };
    std::function<double(double)> sigma = [](double) { return 0.0; };
    std::function<double(double, double)> theta = [](double, double) { return 0.0; };
    std::function<double(double)> zeta_jump = [](double) { return 0.0; };
    LevyMeasure nu = LevyMeasure::none();
};

struct ScalarMap {
    std::string name;
    std::function<double(double)> f;
    std::function<double(double)> df;
    std::function<double(double)> d2f;
};

struct ItoTerms {
    double drift = 0.0;
    double compensator_correction = 0.0;
    double forward_w = 0.0;
    double forward_poisson = 0.0;
    double jump_sum = 0.0;
};

struct ItoLevel {
    double dt = 0.0;
    double lhs = 0.0;               ///< f(X(T)) - f(X(0))
    double rhs = 0.0;               ///< sum of the formula's terms
    double residual = 0.0;          ///< lhs - rhs
    double relative_residual = 0.0; ///< |residual| / max_k |Y(t_k)|
    ItoTerms terms;
};

struct ItoCheckReport {
    std::vector<ItoLevel> levels;   ///< coarsest first; the last level is the path's own grid
    double threshold = 0.0;         ///< pass bound on the finest relative residual
    double threshold_factor = 10.0;
    bool pass = false;

    /// log2 ratio of successive |residual|; about 0.5 for diffusion-driven error.
    std::vector<double> observed_orders() const {
        std::vector<double> out;
        for (std::size_t j = 1; j < levels.size(); ++j) {
            out.push_back(std::log2(std::abs(levels[j - 1].residual) / std::abs(levels[j].residual)));
        }
        return out;
    }
};

namespace detail {

inline void require_finite(double v, const char* term) {
    if (!std::isfinite(v)) throw NumericalError(std::string("ito formula check: non-finite value in term '") + term + "'");
}

inline ItoLevel ito_level(const ItoDynamics& dyn, const ScalarMap& f, const ScenarioPath& path) {
    const TimeGrid& grid = path.grid;
    const double dt = grid.dt();
    const std::size_t n = grid.n_steps();
    const std::size_t m = path.truncation_index;
    const bool jumps = !dyn.nu.empty();
    const MarkQuadrature quad = jumps ? dyn.nu.quadrature(m) : MarkQuadrature{};

    std::vector<std::vector<const PoissonMark*>> marks_at(n + 1);
    for (const auto& mk : path.poisson_marks) {
        if (jumps && dyn.nu.in_set(mk.z, m)) marks_at[mk.node].push_back(&mk);
    }
    std::vector<std::size_t> defaults_at(n + 1, 0);
    for (std::size_t d : path.default_nodes) ++defaults_at[d];

    ItoLevel level;
    level.dt = dt;
    double x = dyn.x0;
    const double y0 = f.f(x);
    double max_abs_y = std::abs(y0);
    ItoTerms& t = level.terms;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = grid.time(i);
        const double mu = dyn.mu(s);
        const double sg = dyn.sigma(s);
        const double fx = f.f(x);
        const double f1 = f.df(x);
        const double f2 = f.d2f(x);

        t.drift += (f1 * mu + 0.5 * f2 * sg * sg) * dt;
        t.forward_w += f1 * sg * path.wiener_increments[i];
        double theta_comp = 0.0;
        if (jumps) {
            theta_comp = quad.integrate([&](double z) { return dyn.theta(s, z); });
            // (f(x+theta) - f(x) - f'(x) theta) nu dz dt
            t.compensator_correction +=
                dt * quad.integrate([&](double z) {
                    const double th = dyn.theta(s, z);
                    return f.f(x + th) - fx - f1 * th;
                });
            // forward integral of f(x+theta) - f(x) against N~: minus its compensator here
            t.forward_poisson -= dt * quad.integrate([&](double z) { return f.f(x + dyn.theta(s, z)) - fx; });
        }
        // continuous part of the step, then the jumps at node i+1
        double x_next = x + mu * dt + sg * path.wiener_increments[i] - theta_comp * dt;
        for (const PoissonMark* mk : marks_at[i + 1]) {
            const double th = dyn.theta(s, mk->z);
            t.forward_poisson += f.f(x + th) - fx;
            x_next += th;
        }
        double x_mid = x;
        for (std::size_t d = 0; d < defaults_at[i + 1]; ++d) {
            const double dz = dyn.zeta_jump(s);
            t.jump_sum += f.f(x_mid + dz) - f.f(x_mid);
            x_mid += dz;
        }
        x_next += x_mid - x;
        x = x_next;
        const double y = f.f(x);
        require_finite(y, "f(X)");
        max_abs_y = std::max(max_abs_y, std::abs(y));
    }
    require_finite(t.drift, "drift");
    require_finite(t.compensator_correction, "compensator correction");
    require_finite(t.forward_w, "forward W integral");
    require_finite(t.forward_poisson, "forward Poisson integral");
    require_finite(t.jump_sum, "finite-variation jump sum");
    level.lhs = f.f(x) - y0;
    level.rhs = t.drift + t.compensator_correction + t.forward_w + t.forward_poisson + t.jump_sum;
    level.residual = level.lhs - level.rhs;
    level.relative_residual = max_abs_y > 0.0 ? std::abs(level.residual) / max_abs_y : std::abs(level.residual);
    return level;
}

}  // namespace detail

/// Compares f(X(T)) - f(X(0)) with the right-hand side of the Ito formula on one path,
/// evaluated on the path's grid and on coarsenings by 2^j, j = refinements-1 .. 1.
inline ItoCheckReport ito_formula_check(const ItoDynamics& dyn, const ScalarMap& f, const ScenarioPath& path,
                                        std::size_t refinements = 3, double threshold_factor = 10.0) {
    if (refinements == 0) throw ConfigurationError("ito formula check: need at least one level");
    ItoCheckReport report;
    report.threshold_factor = threshold_factor;
    for (std::size_t j = refinements; j-- > 0;) {
        const std::size_t factor = std::size_t{1} << j;
        if (path.grid.n_steps() % factor != 0) {
            throw ConfigurationError("ito formula check: n_steps not divisible by the coarsening factor");
        }
        report.levels.push_back(detail::ito_level(dyn, f, factor == 1 ? path : coarsen(path, factor)));
    }
    report.threshold = threshold_factor * std::sqrt(path.grid.dt());
    report.pass = report.levels.back().relative_residual <= report.threshold;
    return report;
}

// ---------------------------------------------------------------------------
// Divergence of bounded anticipating integrands
// ---------------------------------------------------------------------------

/// Sign strategy f_n: on each of the n blocks of the grid, the sign of W's increment
/// over that same block (known only at the block's end).
inline Integrand sign_strategy(const ScenarioPath& path, std::size_t n_blocks) {
    const std::size_t steps = path.grid.n_steps();
    if (n_blocks == 0 || steps % n_blocks != 0) {
        throw ConfigurationError("sign strategy: block count must divide n_steps");
    }
    const std::size_t per = steps / n_blocks;
    Integrand u{std::vector<double>(steps, 0.0), Measurability::anticipating};
    for (std::size_t b = 0; b < n_blocks; ++b) {
        double inc = 0.0;
        for (std::size_t i = b * per; i < (b + 1) * per; ++i) inc += path.wiener_increments[i];
        const double sgn = inc >= 0.0 ? 1.0 : -1.0;
        for (std::size_t i = b * per; i < (b + 1) * per; ++i) u.values[i] = sgn;
    }
    return u;
}

struct DivergenceRow {
    std::size_t n = 0;
    double mean = 0.0;              ///< sample mean of int f_n d^-W
    double std_error = 0.0;
    double expected = 0.0;          ///< sqrt(2 n / pi) * sqrt(T)
    double scaled_mean = 0.0;       ///< sample mean for g_n = n^{-1/4} f_n
    double scaled_std_error = 0.0;
    double scaled_expected = 0.0;   ///< sqrt(2/pi) n^{1/4} sqrt(T)
};

/// Estimates E[int_0^T f_n d^-W] for the sign strategy over an ensemble of paths.
/// Paths use seeds master_seed + p; reduction runs in path order.
inline std::vector<DivergenceRow> divergence_pathology(const TimeGrid& grid, const std::vector<std::size_t>& n_list,
                                                       std::size_t paths_per_n, std::uint64_t master_seed,
                                                       std::size_t workers = 1) {
    for (std::size_t n : n_list) {
        if (n == 0 || grid.n_steps() % n != 0) throw ConfigurationError("divergence pathology: each n must divide n_steps");
    }
    if (paths_per_n < 2) throw ConfigurationError("divergence pathology: need at least two paths");
    std::vector<std::vector<double>> per_path(paths_per_n, std::vector<double>(n_list.size()));
    parallel_for(paths_per_n, workers, [&](std::size_t p) {
        ScenarioPath path(grid);
        path.seed = path_seed(master_seed, p);
        path.wiener_increments = simulate_wiener(grid, path.seed);
        for (std::size_t j = 0; j < n_list.size(); ++j) {
            per_path[p][j] = forward_integral_w(sign_strategy(path, n_list[j]), path).terminal();
        }
    });
    std::vector<DivergenceRow> rows;
    const double root_t = std::sqrt(grid.horizon());
    for (std::size_t j = 0; j < n_list.size(); ++j) {
        RunningStats s;
        for (std::size_t p = 0; p < paths_per_n; ++p) s.add(per_path[p][j]);
        const double n = static_cast<double>(n_list[j]);
        const double scale = std::pow(n, -0.25);
        DivergenceRow r;
        r.n = n_list[j];
        r.mean = s.mean();
        r.std_error = s.std_error();
        r.expected = std::sqrt(2.0 * n / M_PI) * root_t;
        r.scaled_mean = scale * s.mean();
        r.scaled_std_error = scale * s.std_error();
        r.scaled_expected = std::sqrt(2.0 / M_PI) * std::pow(n, 0.25) * root_t;
        rows.push_back(r);
    }
    return rows;
}

}  // namespace fwdopt
