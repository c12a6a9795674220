#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "fwdopt/errors.hpp"
#include "fwdopt/levy_measure.hpp"
#include "fwdopt/random.hpp"
#include "fwdopt/time_grid.hpp"

namespace fwdopt {

/// One event of the Poisson random measure. `node` closes the grid interval
/// containing the exact event time.
struct PoissonMark {
    std::size_t node;
    double time;
    double z;
};

// ---------------------------------------------------------------------------
// Default mechanisms
// ---------------------------------------------------------------------------

/// H independent of (W, N) with per-interval intensity lambda_i (thinning).
struct IndependentIntensity {
    std::vector<double> lambda;

    static IndependentIntensity constant(const TimeGrid& grid, double rate) {
        return {std::vector<double>(grid.n_steps(), rate)};
    }
};

/// H = 1{tau <= t}, tau = first t with N(t + eps) - N(t - eps) >= threshold.
/// Anticipates N by eps; epsilon must be an integer multiple of dt.
struct WindowTrigger {
    double epsilon = 0.1;
    std::size_t threshold = 2;
};

/// A single default with intensity lambda; coefficients may switch regime after it.
struct AfterDefaultRegime {
    std::vector<double> lambda;

    static AfterDefaultRegime constant(const TimeGrid& grid, double rate) {
        return {std::vector<double>(grid.n_steps(), rate)};
    }
};

struct NoDefault {};

using DefaultMechanism = std::variant<NoDefault, IndependentIntensity, WindowTrigger, AfterDefaultRegime>;

inline std::size_t lookahead_steps(const TimeGrid& grid, const DefaultMechanism& mech) {
    if (const auto* w = std::get_if<WindowTrigger>(&mech)) {
        if (w->epsilon < grid.dt() * (1.0 - 1e-12)) {
            throw ConfigurationError("window trigger: epsilon must be at least dt");
        }
        return grid.steps_for(w->epsilon, "window trigger epsilon");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Scenario path
// ---------------------------------------------------------------------------

/// One joint realization of (W, N, H) on a grid.
struct ScenarioPath {
    TimeGrid grid;
    std::vector<double> wiener_increments;        ///< size n_steps; entry i is W(t_{i+1}) - W(t_i)
    std::vector<PoissonMark> poisson_marks;       ///< events in (0, T], sorted by time
    std::vector<PoissonMark> lookahead_marks;     ///< events in (T, T + lookahead], nodes n+1.. (window triggers only)
    std::vector<std::size_t> default_nodes;       ///< strictly increasing jump nodes of H
    std::uint64_t seed = 0;
    std::size_t truncation_index = 1;

    explicit ScenarioPath(TimeGrid g) : grid(g), wiener_increments(g.n_steps(), 0.0) {}

    /// W(t_k) for k = 0..n.
    std::vector<double> wiener_path() const {
        std::vector<double> w(grid.n_nodes(), 0.0);
        for (std::size_t i = 0; i < wiener_increments.size(); ++i) w[i + 1] = w[i] + wiener_increments[i];
        return w;
    }

    /// Number of Poisson events at each node 0..n (+ lookahead nodes when present).
    std::vector<std::size_t> mark_counts(bool include_lookahead = false) const {
        std::size_t extra = 0;
        if (include_lookahead) {
            for (const auto& m : lookahead_marks) extra = std::max(extra, m.node - grid.n_steps());
        }
        std::vector<std::size_t> counts(grid.n_nodes() + extra, 0);
        for (const auto& m : poisson_marks) ++counts[m.node];
        if (include_lookahead) {
            for (const auto& m : lookahead_marks) ++counts[m.node];
        }
        return counts;
    }

    /// H(t_k) for k = 0..n.
    std::vector<std::size_t> default_counts() const {
        std::vector<std::size_t> h(grid.n_nodes(), 0);
        for (std::size_t d : default_nodes) ++h[d];
        for (std::size_t k = 1; k < h.size(); ++k) h[k] += h[k - 1];
        return h;
    }
};

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// n_steps i.i.d. N(0, dt) increments, deterministic in the seed.
inline std::vector<double> simulate_wiener(const TimeGrid& grid, std::uint64_t seed) {
    auto rng = make_engine(seed, Stream::wiener);
    std::normal_distribution<double> normal(0.0, std::sqrt(grid.dt()));
    std::vector<double> dw(grid.n_steps());
    for (auto& x : dw) x = normal(rng);
    return dw;
}

namespace detail {

inline std::vector<PoissonMark> simulate_marks_on(double t0, double length, const TimeGrid& grid,
                                                  const LevyMeasure& nu, std::size_t m, Engine& rng) {
    std::vector<PoissonMark> marks;
    if (nu.empty() || length <= 0.0) return marks;
    const QuadratureValue mass = nu.mass(m);
    if (!std::isfinite(mass.value) || mass.value < 0.0) {
        throw ConfigurationError("poisson measure: nu(U_m) is not finite");
    }
    if (mass.value == 0.0) return marks;
    std::poisson_distribution<std::size_t> count_dist(length * mass.value);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t count = count_dist(rng);
    marks.reserve(count);
    for (std::size_t e = 0; e < count; ++e) {
        double t = t0 + length * unif(rng);
        if (t <= t0) t = std::nextafter(t0, t0 + length);
        const double z = nu.sample_mark(rng, m);
        // right-endpoint snapping; beyond T the grid spacing is extended
        std::size_t node;
        if (t <= grid.horizon()) {
            node = grid.snap_right(t);
        } else {
            node = grid.n_steps() + static_cast<std::size_t>(std::ceil((t - grid.horizon()) / grid.dt()));
        }
        marks.push_back({node, t, z});
    }
    std::sort(marks.begin(), marks.end(), [](const PoissonMark& a, const PoissonMark& b) { return a.time < b.time; });
    return marks;
}

}  // namespace detail

/// Marked-point realization of N restricted to U_m on (0, T].
inline std::vector<PoissonMark> simulate_poisson_measure(const TimeGrid& grid, const LevyMeasure& nu,
                                                         std::size_t truncation_index, std::uint64_t seed) {
    auto rng = make_engine(seed, Stream::poisson);
    return detail::simulate_marks_on(0.0, grid.horizon(), grid, nu, truncation_index, rng);
}

/// Events of N on (T, T + steps dt], from an independent stream. Only anticipating
/// mechanisms read them; they never enter market integrals.
inline std::vector<PoissonMark> simulate_poisson_lookahead(const TimeGrid& grid, const LevyMeasure& nu,
                                                           std::size_t truncation_index, std::size_t steps,
                                                           std::uint64_t seed) {
    auto rng = make_engine(seed, Stream::poisson_lookahead);
    return detail::simulate_marks_on(grid.horizon(), static_cast<double>(steps) * grid.dt(), grid, nu,
                                     truncation_index, rng);
}

namespace detail {

inline std::vector<std::size_t> thin(const TimeGrid& grid, const std::vector<double>& lambda, bool single_jump,
                                     Engine& rng) {
    if (lambda.size() != grid.n_steps()) {
        throw ConfigurationError("default intensity: expected one rate per grid interval");
    }
    std::vector<std::size_t> jumps;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        if (lambda[i] < 0.0 || !std::isfinite(lambda[i])) {
            throw ConfigurationError("default intensity: lambda must be finite and >= 0");
        }
        const double p = lambda[i] * grid.dt();
        if (p > 1.0) throw ConfigurationError("default intensity: lambda * dt exceeds 1, refine the grid");
        // draw unconditionally so the stream layout does not depend on lambda
        const double u = unif(rng);
        if (u < p) {
            jumps.push_back(i + 1);
            if (single_jump) break;
        }
    }
    return jumps;
}

inline std::vector<std::size_t> window_trigger_time(const ScenarioPath& path, const WindowTrigger& trig) {
    const TimeGrid& grid = path.grid;
    const std::size_t w = lookahead_steps(grid, trig);
    if (trig.threshold == 0) throw ConfigurationError("window trigger: threshold must be >= 1");
    const std::size_t n = grid.n_steps();
    std::vector<std::size_t> counts(n + w + 1, 0);
    for (const auto& m : path.poisson_marks) ++counts[m.node];
    for (const auto& m : path.lookahead_marks) {
        if (m.node <= n + w) ++counts[m.node];
    }
    // window at node j covers nodes j-w+1 .. j+w (nodes >= 1)
    std::size_t window = 0;
    for (std::size_t k = 1; k <= w; ++k) window += counts[k];
    for (std::size_t j = 0; j <= n; ++j) {
        if (window >= trig.threshold) return {j};
        if (j + 1 > n) break;
        window += counts[j + 1 + w];
        if (j + 1 >= w && j + 1 - w >= 1) window -= counts[j + 1 - w];
    }
    return {};
}

}  // namespace detail

/// Shifts default jumps off Poisson-mark nodes (one node later, repeatedly) and keeps
/// them strictly increasing; jumps pushed past T are dropped. A jump at t = 0 is
/// recorded at node 1 since H(0) = 0.
inline std::vector<std::size_t> resolve_coincidences(const TimeGrid& grid, const std::vector<PoissonMark>& marks,
                                                     std::vector<std::size_t> jumps) {
    std::vector<bool> occupied(grid.n_nodes(), false);
    for (const auto& m : marks) {
        if (m.node < occupied.size()) occupied[m.node] = true;
    }
    std::vector<std::size_t> out;
    out.reserve(jumps.size());
    std::sort(jumps.begin(), jumps.end());
    for (std::size_t d : jumps) {
        if (d == 0) d = 1;
        if (!out.empty() && d <= out.back()) d = out.back() + 1;
        while (d <= grid.n_steps() && occupied[d]) ++d;
        if (d > grid.n_steps()) break;
        out.push_back(d);
    }
    return out;
}

/// Jump nodes of H for the given mechanism; path_so_far must already carry its Poisson marks.
inline std::vector<std::size_t> simulate_default(const TimeGrid& grid, const DefaultMechanism& mech,
                                                 const ScenarioPath& path_so_far, std::uint64_t seed) {
    auto rng = make_engine(seed, Stream::default_jumps);
    std::vector<std::size_t> raw = std::visit(
        [&](const auto& m) -> std::vector<std::size_t> {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, NoDefault>) {
                return {};
            } else if constexpr (std::is_same_v<M, IndependentIntensity>) {
                return detail::thin(grid, m.lambda, false, rng);
            } else if constexpr (std::is_same_v<M, AfterDefaultRegime>) {
                return detail::thin(grid, m.lambda, true, rng);
            } else {
                return detail::window_trigger_time(path_so_far, m);
            }
        },
        mech);
    return resolve_coincidences(grid, path_so_far.poisson_marks, std::move(raw));
}

/// Full joint draw: W, then N on U_m (plus lookahead if the mechanism needs it), then H.
inline ScenarioPath simulate_scenario(const TimeGrid& grid, const LevyMeasure& nu, std::size_t truncation_index,
                                      const DefaultMechanism& mech, std::uint64_t seed) {
    ScenarioPath path(grid);
    path.seed = seed;
    path.truncation_index = truncation_index;
    path.wiener_increments = simulate_wiener(grid, seed);
    if (!nu.empty()) {
        path.poisson_marks = simulate_poisson_measure(grid, nu, truncation_index, seed);
        if (const std::size_t w = lookahead_steps(grid, mech); w > 0) {
            path.lookahead_marks = simulate_poisson_lookahead(grid, nu, truncation_index, w, seed);
        }
    } else {
        lookahead_steps(grid, mech);
    }
    path.default_nodes = simulate_default(grid, mech, path, seed);
    return path;
}

/// The same realization seen on a grid `factor` times coarser: increments are summed and
/// event nodes map to the coarse node closing their interval. Several default jumps may
/// land on one coarse node.
inline ScenarioPath coarsen(const ScenarioPath& path, std::size_t factor) {
    const std::size_t n = path.grid.n_steps();
    if (factor == 0 || n % factor != 0) throw ConfigurationError("coarsen: factor must divide n_steps");
    ScenarioPath out(TimeGrid(path.grid.horizon(), n / factor));
    out.seed = path.seed;
    out.truncation_index = path.truncation_index;
    for (std::size_t i = 0; i < n; ++i) out.wiener_increments[i / factor] += path.wiener_increments[i];
    auto up = [factor](std::size_t node) { return (node + factor - 1) / factor; };
    for (auto m : path.poisson_marks) {
        m.node = up(m.node);
        out.poisson_marks.push_back(m);
    }
    for (auto m : path.lookahead_marks) {
        m.node = n / factor + up(m.node - n);
        out.lookahead_marks.push_back(m);
    }
    for (std::size_t d : path.default_nodes) out.default_nodes.push_back(up(d));
    return out;
}

}  // namespace fwdopt
