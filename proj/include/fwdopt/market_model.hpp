#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fwdopt/errors.hpp"
#include "fwdopt/information_flow.hpp"
#include "fwdopt/levy_measure.hpp"
#include "fwdopt/scenario.hpp"

namespace fwdopt {

/// Coefficient values on each grid interval; entry i holds the value at t_i.
struct Regime {
    std::vector<double> rho;
    std::vector<double> mu;
    std::vector<double> sigma;
    std::vector<double> kappa;
    std::vector<double> theta_scale;  ///< theta(t_i, z) = theta_scale[i] * theta_mark(z)

    static Regime constant(const TimeGrid& grid, double rho, double mu, double sigma, double kappa,
                           double theta_scale = 1.0) {
        const std::size_t n = grid.n_steps();
        return {std::vector<double>(n, rho), std::vector<double>(n, mu), std::vector<double>(n, sigma),
                std::vector<double>(n, kappa), std::vector<double>(n, theta_scale)};
    }
};

struct CoefficientValues {
    double rho;
    double mu;
    double sigma;
    double kappa;
    double theta_scale;
};

/// Market coefficients. `pre` applies on intervals starting before the first default,
/// `post` (when set) on every later interval.
struct ModelCoefficients {
    Regime pre;
    std::optional<Regime> post;
    std::function<double(double)> theta_mark;  ///< empty: S1 does not react to N
    LevyMeasure nu = LevyMeasure::none();
    std::size_t truncation_index = 1;

    static ModelCoefficients constant(const TimeGrid& grid, double rho, double mu, double sigma, double kappa) {
        ModelCoefficients c;
        c.pre = Regime::constant(grid, rho, mu, sigma, kappa);
        c.validate(grid);
        return c;
    }

    bool has_marks() const { return static_cast<bool>(theta_mark) && !nu.empty(); }

    /// Checks sizes and bounds and caches the mark quadrature; call after any edit.
    void validate(const TimeGrid& grid) {
        check_regime(pre, grid, "pre");
        if (post) check_regime(*post, grid, "post");
        rule_ = MarkQuadrature{};
        theta_mean_ = 0.0;
        theta_second_ = 0.0;
        support_.clear();
        if (has_marks()) {
            if (truncation_index == 0 || truncation_index > nu.truncation_count()) {
                throw ConfigurationError("coefficients: truncation index outside the levy measure's sets");
            }
            rule_ = nu.quadrature(truncation_index);
            theta_mean_ = rule_.integrate(theta_mark);
            theta_second_ = rule_.integrate([&](double z) { return theta_mark(z) * theta_mark(z); });
            for (const auto& a : nu.atoms()) {
                if (nu.in_set(a.z, truncation_index)) support_.push_back(a.z);
            }
            if (nu.has_density()) {
                const double c = nu.cutoff(truncation_index);
                const double zm = nu.density()->z_max;
                if (nu.density()->c_pos > 0.0) support_.insert(support_.end(), {c, zm});
                if (nu.density()->c_neg > 0.0) support_.insert(support_.end(), {-c, -zm});
            }
            for (const Regime* r : {&pre, post ? &*post : nullptr}) {
                if (!r) continue;
                for (std::size_t i = 0; i < r->theta_scale.size(); ++i) {
                    for (double z : support_) {
                        const double th = r->theta_scale[i] * theta_mark(z);
                        if (!std::isfinite(th) || th <= -1.0) {
                            throw ConfigurationError("coefficients: theta must exceed -1 (interval " + std::to_string(i) +
                                                     ", z = " + std::to_string(z) + ")");
                        }
                    }
                }
            }
            if (!std::isfinite(theta_mean_) || !std::isfinite(theta_second_)) {
                throw ConfigurationError("coefficients: integral of theta against nu is not finite");
            }
        }
        n_steps_ = grid.n_steps();
        validated_ = true;
    }

    void require_validated(const TimeGrid& grid) const {
        if (!validated_ || n_steps_ != grid.n_steps()) {
            throw ContractViolation("coefficients: validate() against this grid before use");
        }
    }

    const Regime& regime(bool defaulted) const { return defaulted && post ? *post : pre; }

    CoefficientValues at(std::size_t i, bool defaulted) const {
        const Regime& r = regime(defaulted);
        return {r.rho[i], r.mu[i], r.sigma[i], r.kappa[i], r.theta_scale[i]};
    }

    double theta(std::size_t i, bool defaulted, double z) const {
        return has_marks() ? regime(defaulted).theta_scale[i] * theta_mark(z) : 0.0;
    }

    /// Quadrature rule for nu on U_m (empty without marks).
    const MarkQuadrature& mark_rule() const { return rule_; }
    /// int_{U_m} theta_mark dnu and int_{U_m} theta_mark^2 dnu.
    double theta_mark_mean() const { return theta_mean_; }
    double theta_mark_second_moment() const { return theta_second_; }
    /// Marks at which margins are checked: atoms in U_m and the density's endpoints.
    const std::vector<double>& margin_support() const { return support_; }

private:
    static void check_regime(const Regime& r, const TimeGrid& grid, const char* name) {
        const std::size_t n = grid.n_steps();
        const std::string where = std::string("coefficients.") + name;
        if (r.rho.size() != n || r.mu.size() != n || r.sigma.size() != n || r.kappa.size() != n ||
            r.theta_scale.size() != n) {
            throw ConfigurationError(where + ": every coefficient needs one value per grid interval");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(r.rho[i]) || !std::isfinite(r.mu[i]) || !std::isfinite(r.sigma[i]) ||
                !std::isfinite(r.kappa[i]) || !std::isfinite(r.theta_scale[i])) {
                throw ConfigurationError(where + ": non-finite coefficient on interval " + std::to_string(i));
            }
            if (r.sigma[i] < 0.0) throw ConfigurationError(where + ".sigma: must be >= 0");
            if (r.kappa[i] < -1.0) throw ConfigurationError(where + ".kappa: must be >= -1");
        }
    }

    MarkQuadrature rule_;
    double theta_mean_ = 0.0;
    double theta_second_ = 0.0;
    std::vector<double> support_;
    std::size_t n_steps_ = 0;
    bool validated_ = false;
};

namespace detail {

/// defaulted_before[i] = H(t_i) >= 1, i.e. interval i runs in the post-default regime.
inline std::vector<bool> defaulted_before(const ScenarioPath& path) {
    std::vector<bool> out(path.grid.n_steps(), false);
    if (!path.default_nodes.empty()) {
        for (std::size_t i = path.default_nodes.front(); i < out.size(); ++i) out[i] = true;
    }
    return out;
}

inline std::vector<std::vector<double>> marks_by_node(const ScenarioPath& path, const ModelCoefficients& c) {
    std::vector<std::vector<double>> out(path.grid.n_nodes());
    if (!c.has_marks()) return out;
    for (const auto& m : path.poisson_marks) {
        if (c.nu.in_set(m.z, c.truncation_index)) out[m.node].push_back(m.z);
    }
    return out;
}

inline std::vector<std::size_t> defaults_by_node(const ScenarioPath& path) {
    std::vector<std::size_t> out(path.grid.n_nodes(), 0);
    for (std::size_t d : path.default_nodes) ++out[d];
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Asset prices
// ---------------------------------------------------------------------------

struct AssetPath {
    std::vector<double> s0;  ///< bond
    std::vector<double> s1;  ///< defaultable asset
};

/// Bond and asset on every node from the product-form solution.
inline AssetPath evaluate_asset(const ModelCoefficients& c, const ScenarioPath& path, double s0_initial = 1.0,
                                double s1_initial = 1.0) {
    const TimeGrid& grid = path.grid;
    c.require_validated(grid);
    const double dt = grid.dt();
    const std::size_t n = grid.n_steps();
    const auto defaulted = detail::defaulted_before(path);
    const auto marks = detail::marks_by_node(path, c);
    const auto defaults = detail::defaults_by_node(path);

    AssetPath out{std::vector<double>(n + 1), std::vector<double>(n + 1)};
    out.s0[0] = s0_initial;
    out.s1[0] = s1_initial;
    double log_s0 = 0.0;
    double log_s1 = 0.0;
    bool dead = false;
    for (std::size_t i = 0; i < n; ++i) {
        const CoefficientValues v = c.at(i, defaulted[i]);
        log_s0 += v.rho * dt;
        if (!dead) {
            log_s1 += (v.mu - 0.5 * v.sigma * v.sigma - v.theta_scale * c.theta_mark_mean()) * dt +
                      v.sigma * path.wiener_increments[i];
            for (double z : marks[i + 1]) log_s1 += std::log1p(v.theta_scale * c.theta_mark(z));
            for (std::size_t d = 0; d < defaults[i + 1]; ++d) {
                if (v.kappa <= -1.0) {
                    dead = true;
                    break;
                }
                log_s1 += std::log1p(v.kappa);
            }
        }
        if (!std::isfinite(log_s1) || !std::isfinite(log_s0) || log_s1 > 700.0 || log_s0 > 700.0) {
            throw NumericalError("asset evaluation: exponent overflow at node " + std::to_string(i + 1));
        }
        out.s0[i + 1] = s0_initial * std::exp(log_s0);
        out.s1[i + 1] = dead ? 0.0 : s1_initial * std::exp(log_s1);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stopping
// ---------------------------------------------------------------------------

enum class StoppingKind { first_default, horizon_only, zero_value };

struct StopResult {
    std::size_t node;
    double time;
};

/// tau per path. horizon_only and zero_value both give T ^ first zero of S1.
inline StopResult apply_stopping(StoppingKind kind, const ScenarioPath& path, const AssetPath& asset) {
    const TimeGrid& grid = path.grid;
    std::size_t node = grid.n_steps();
    for (std::size_t k = 0; k < asset.s1.size(); ++k) {
        if (asset.s1[k] == 0.0) {
            node = k;
            break;
        }
    }
    if (kind == StoppingKind::first_default && !path.default_nodes.empty()) {
        node = std::min(node, path.default_nodes.front());
    }
    return {node, grid.time(node)};
}

// ---------------------------------------------------------------------------
// Admissibility
// ---------------------------------------------------------------------------

/// pi at node i as a function of the investor's state at node i only.
using Policy = std::function<double(std::size_t node, const std::vector<double>& state)>;

struct AdmissibilityCertificate {
    bool adapted = false;          ///< (i) recomputed from the flow state
    bool left_continuous = false;  ///< (i) one value per interval, fixed at its left node
    bool margins = false;          ///< (ii) 1 + pi kappa and 1 + pi theta bounded away from 0
    bool moments = false;          ///< (iii) finite grid moment sums
    bool w_integrable = false;     ///< (iv) pi sigma finite on the grid
    bool n_integrable = false;     ///< (v) pi theta, ln(1 + pi theta), pi theta/(1 + pi theta) finite
    double epsilon_pi = 0.0;       ///< realized min over nodes/marks of the margins

    bool complete() const {
        return adapted && left_continuous && margins && moments && w_integrable && n_integrable && epsilon_pi > 0.0;
    }
};

struct AdmissibilityViolation {
    int item;  ///< Definition item 1..5
    std::size_t node;
    std::optional<double> mark;
    std::string message;
};

struct PortfolioProcess {
    std::vector<double> values;  ///< pi on interval i
    std::optional<AdmissibilityCertificate> certificate;

    double epsilon_pi() const { return certificate ? certificate->epsilon_pi : 0.0; }
};

struct AdmissibilityResult {
    PortfolioProcess portfolio;
    std::vector<AdmissibilityViolation> violations;

    bool admissible() const { return violations.empty(); }
};

/// Grid analogue of the admissibility definition for one path. Values are recomputed
/// from the flow's state; `claimed` (if given) must match them exactly. Returns the
/// portfolio with a certificate, or the violations (first one per item) with witnesses.
inline AdmissibilityResult check_admissibility(const Policy& policy, const InformationFlow& flow,
                                               const ModelCoefficients& c, const ScenarioPath& path,
                                               const std::vector<double>* claimed = nullptr) {
    const TimeGrid& grid = path.grid;
    c.require_validated(grid);
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();
    AdmissibilityResult res;
    AdmissibilityCertificate cert;
    auto violate = [&](int item, std::size_t node, std::optional<double> mark, std::string msg) {
        for (const auto& v : res.violations) {
            if (v.item == item) return;
        }
        res.violations.push_back({item, node, mark, std::move(msg)});
    };

    const auto states = flow.states(path);
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = policy(i, states[i]);

    cert.adapted = true;
    if (claimed) {
        if (claimed->size() != n) {
            cert.adapted = false;
            violate(1, 0, std::nullopt, "portfolio length differs from the grid");
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                if ((*claimed)[i] != values[i]) {
                    cert.adapted = false;
                    violate(1, i, std::nullopt, "value is not reproduced from the flow state");
                    break;
                }
            }
        }
    }
    // re-evaluation must not depend on anything but the state
    for (std::size_t i = 0; i < n && cert.adapted; ++i) {
        if (policy(i, states[i]) != values[i]) {
            cert.adapted = false;
            violate(1, i, std::nullopt, "policy is not a function of the state");
        }
    }
    cert.left_continuous = true;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(values[i])) {
            cert.left_continuous = false;
            violate(1, i, std::nullopt, "non-finite portfolio value");
            break;
        }
    }

    const auto defaulted = detail::defaulted_before(path);
    double eps = std::numeric_limits<double>::infinity();
    cert.margins = true;
    double moment_drift = 0.0;
    double moment_jump = 0.0;
    cert.w_integrable = true;
    cert.n_integrable = true;
    std::vector<std::vector<double>> realized(n + 1);
    if (c.has_marks()) {
        for (const auto& m : path.poisson_marks) realized[m.node].push_back(m.z);
    }
    for (std::size_t i = 0; i < n && cert.left_continuous; ++i) {
        const double p = values[i];
        const CoefficientValues v = c.at(i, defaulted[i]);
        const double mk = 1.0 + p * v.kappa;
        eps = std::min(eps, mk);
        if (mk <= 0.0) {
            cert.margins = false;
            violate(2, i, std::nullopt,
                    "pi * kappa = " + std::to_string(p * v.kappa) + " <= -1 on interval " + std::to_string(i));
        }
        auto check_mark = [&](double z) {
            const double th = c.theta(i, defaulted[i], z);
            const double mt = 1.0 + p * th;
            eps = std::min(eps, mt);
            if (mt <= 0.0) {
                cert.margins = false;
                violate(2, i, z, "pi * theta = " + std::to_string(p * th) + " <= -1 at mark z = " + std::to_string(z));
            } else if (!std::isfinite(std::log(mt)) || !std::isfinite(p * th / mt)) {
                cert.n_integrable = false;
                violate(5, i, z, "jump integrand not finite");
            }
        };
        for (double z : c.margin_support()) check_mark(z);
        for (double z : realized[i + 1]) check_mark(z);
        moment_drift += (std::abs(v.mu - v.rho) * std::abs(p) + v.sigma * v.sigma * p * p) * dt;
        moment_jump += p * p * v.theta_scale * v.theta_scale * c.theta_mark_second_moment() * dt;
        if (!std::isfinite(p * v.sigma)) {
            cert.w_integrable = false;
            violate(4, i, std::nullopt, "pi * sigma not finite");
        }
    }
    cert.moments = std::isfinite(moment_drift) && std::isfinite(moment_jump);
    if (!cert.moments) violate(3, n, std::nullopt, "moment sums diverge");
    cert.epsilon_pi = std::isfinite(eps) ? eps : 1.0;
    if (n == 0) cert.epsilon_pi = 1.0;

    res.portfolio.values = std::move(values);
    if (res.violations.empty() && cert.complete()) {
        res.portfolio.certificate = cert;
    } else if (res.violations.empty()) {
        violate(2, 0, std::nullopt, "margin epsilon_pi is not positive");
    }
    return res;
}

inline Policy constant_policy(double value) {
    return [value](std::size_t, const std::vector<double>&) { return value; };
}

// ---------------------------------------------------------------------------
// Wealth
// ---------------------------------------------------------------------------

struct WealthPath {
    std::vector<double> pre_stop;  ///< X~(t_k ^ tau)
    double terminal = 0.0;         ///< X~(tau) exp(int_tau^T rho)
    double x0 = 1.0;
    std::size_t tau_node = 0;
    double log_terminal = 0.0;
};

/// Closed-form wealth: the log-increment on interval i is
///   [rho + (mu - rho) pi - sigma^2 pi^2 / 2 - pi theta_scale int theta dnu] dt + pi sigma dW
///   + sum over marks ln(1 + pi theta) + sum over defaults ln(1 + pi kappa),
/// accumulated up to tau and compounded at rho afterwards.
inline WealthPath evaluate_wealth(const PortfolioProcess& pi, const ModelCoefficients& c, const ScenarioPath& path,
                                  const StopResult& stop, double x0 = 1.0) {
    if (!pi.certificate || !pi.certificate->complete()) {
        throw ContractViolation("evaluate_wealth: portfolio has no complete admissibility certificate");
    }
    if (!(x0 > 0.0)) throw ConfigurationError("evaluate_wealth: initial wealth must be positive");
    const TimeGrid& grid = path.grid;
    c.require_validated(grid);
    const std::size_t n = grid.n_steps();
    if (pi.values.size() != n) throw ContractViolation("evaluate_wealth: portfolio length differs from the grid");
    const double dt = grid.dt();
    const auto defaulted = detail::defaulted_before(path);
    const auto marks = detail::marks_by_node(path, c);
    const auto defaults = detail::defaults_by_node(path);

    WealthPath w;
    w.x0 = x0;
    w.tau_node = stop.node;
    w.pre_stop.assign(n + 1, x0);
    double log_x = std::log(x0);
    for (std::size_t i = 0; i < stop.node; ++i) {
        const double p = pi.values[i];
        const CoefficientValues v = c.at(i, defaulted[i]);
        log_x += (v.rho + (v.mu - v.rho) * p - 0.5 * v.sigma * v.sigma * p * p -
                  p * v.theta_scale * c.theta_mark_mean()) * dt +
                 p * v.sigma * path.wiener_increments[i];
        for (double z : marks[i + 1]) log_x += std::log1p(p * c.theta(i, defaulted[i], z));
        for (std::size_t d = 0; d < defaults[i + 1]; ++d) log_x += std::log1p(p * v.kappa);
        if (!std::isfinite(log_x) || log_x > 700.0) {
            throw NumericalError("evaluate_wealth: exponent overflow at node " + std::to_string(i + 1));
        }
        w.pre_stop[i + 1] = std::exp(log_x);
    }
    for (std::size_t k = stop.node + 1; k <= n; ++k) w.pre_stop[k] = w.pre_stop[stop.node];
    double log_terminal = log_x;
    for (std::size_t i = stop.node; i < n; ++i) log_terminal += c.at(i, defaulted[i]).rho * dt;
    w.log_terminal = log_terminal;
    w.terminal = std::exp(log_terminal);
    return w;
}

// ---------------------------------------------------------------------------
// Direct discretizations (reference only)
// ---------------------------------------------------------------------------

/// Euler scheme for the asset SDE; returns S1 on every node.
inline std::vector<double> euler_asset(const ModelCoefficients& c, const ScenarioPath& path, double s1_initial = 1.0) {
    const TimeGrid& grid = path.grid;
    c.require_validated(grid);
    const double dt = grid.dt();
    const auto defaulted = detail::defaulted_before(path);
    const auto marks = detail::marks_by_node(path, c);
    const auto defaults = detail::defaults_by_node(path);
    std::vector<double> s(grid.n_nodes(), s1_initial);
    for (std::size_t i = 0; i < grid.n_steps(); ++i) {
        const CoefficientValues v = c.at(i, defaulted[i]);
        double ret = v.mu * dt + v.sigma * path.wiener_increments[i] - v.theta_scale * c.theta_mark_mean() * dt;
        for (double z : marks[i + 1]) ret += c.theta(i, defaulted[i], z);
        ret += v.kappa * static_cast<double>(defaults[i + 1]);
        s[i + 1] = s[i] * (1.0 + ret);
    }
    return s;
}

/// Euler scheme for the wealth SDE up to tau, then compounded at rho.
inline WealthPath euler_wealth(const std::vector<double>& pi, const ModelCoefficients& c, const ScenarioPath& path,
                               const StopResult& stop, double x0 = 1.0) {
    const TimeGrid& grid = path.grid;
    c.require_validated(grid);
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();
    const auto defaulted = detail::defaulted_before(path);
    const auto marks = detail::marks_by_node(path, c);
    const auto defaults = detail::defaults_by_node(path);
    WealthPath w;
    w.x0 = x0;
    w.tau_node = stop.node;
    w.pre_stop.assign(n + 1, x0);
    for (std::size_t i = 0; i < stop.node; ++i) {
        const CoefficientValues v = c.at(i, defaulted[i]);
        double ret = (v.mu - v.rho) * dt + v.sigma * path.wiener_increments[i] -
                     v.theta_scale * c.theta_mark_mean() * dt;
        for (double z : marks[i + 1]) ret += c.theta(i, defaulted[i], z);
        ret += v.kappa * static_cast<double>(defaults[i + 1]);
        w.pre_stop[i + 1] = w.pre_stop[i] * (1.0 + v.rho * dt + pi[i] * ret);
    }
    for (std::size_t k = stop.node + 1; k <= n; ++k) w.pre_stop[k] = w.pre_stop[stop.node];
    double growth = 1.0;
    for (std::size_t i = stop.node; i < n; ++i) growth *= 1.0 + c.at(i, defaulted[i]).rho * dt;
    w.terminal = w.pre_stop[stop.node] * growth;
    w.log_terminal = std::log(w.terminal);
    return w;
}

}  // namespace fwdopt
