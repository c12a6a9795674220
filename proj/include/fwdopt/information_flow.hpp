#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "fwdopt/errors.hpp"
#include "fwdopt/scenario.hpp"

namespace fwdopt {

enum class FlowKind { partial, full, anticipating };

/// Scalar quantities an investor may observe at a node.
enum class Observable {
    wiener,               ///< W(t)
    poisson_count,        ///< N(t) = number of events in (0, t]
    default_count,        ///< H(t)
    window_count,         ///< N(t) - N(t - eps), the trailing window
    poisson_forward,      ///< N(t + eps) - N(t), anticipating
    wiener_forward_sign,  ///< sign(W(t + eps) - W(t)), anticipating
};

inline bool is_anticipating(Observable o) {
    return o == Observable::poisson_forward || o == Observable::wiener_forward_sign;
}

inline std::string_view to_string(Observable o) {
    switch (o) {
        case Observable::wiener: return "wiener";
        case Observable::poisson_count: return "poisson_count";
        case Observable::default_count: return "default_count";
        case Observable::window_count: return "window_count";
        case Observable::poisson_forward: return "poisson_forward";
        case Observable::wiener_forward_sign: return "wiener_forward_sign";
    }
    return "unknown";
}

inline Observable observable_from_string(std::string_view s) {
    for (auto o : {Observable::wiener, Observable::poisson_count, Observable::default_count, Observable::window_count,
                   Observable::poisson_forward, Observable::wiener_forward_sign}) {
        if (to_string(o) == s) return o;
    }
    throw ConfigurationError("information flow: unknown observable '" + std::string(s) + "'");
}

/// The investor's filtration, realized as a finite per-node state vector.
/// Anything downstream that claims G_t-measurability must be a function of state(path, node).
class InformationFlow {
public:
    static InformationFlow full(std::vector<Observable> adapted_extras = {}, std::size_t window_steps = 1) {
        std::vector<Observable> obs = base();
        obs.insert(obs.end(), adapted_extras.begin(), adapted_extras.end());
        return InformationFlow(FlowKind::full, std::move(obs), window_steps);
    }

    static InformationFlow partial(std::vector<Observable> observed, std::size_t window_steps = 1) {
        return InformationFlow(FlowKind::partial, std::move(observed), window_steps);
    }

    static InformationFlow anticipating(std::vector<Observable> extras, std::size_t window_steps) {
        std::vector<Observable> obs = base();
        obs.insert(obs.end(), extras.begin(), extras.end());
        return InformationFlow(FlowKind::anticipating, std::move(obs), window_steps);
    }

    FlowKind kind() const { return kind_; }
    const std::vector<Observable>& observables() const { return observables_; }
    std::size_t window_steps() const { return window_steps_; }
    std::size_t dimension() const { return observables_.size(); }

    bool observes(Observable o) const {
        return std::find(observables_.begin(), observables_.end(), o) != observables_.end();
    }

    /// True when every observable of this flow is also available to `other`.
    bool contained_in(const InformationFlow& other) const {
        return std::all_of(observables_.begin(), observables_.end(), [&](Observable o) { return other.observes(o); });
    }

    /// State at every node 0..n of a path, row-major [node][observable].
    std::vector<std::vector<double>> states(const ScenarioPath& path) const {
        const std::size_t n = path.grid.n_steps();
        const std::vector<double> w = path.wiener_path();
        const std::vector<std::size_t> counts = path.mark_counts();
        const std::vector<std::size_t> h = path.default_counts();
        std::vector<std::size_t> cum(n + 1, 0);
        for (std::size_t k = 0; k <= n; ++k) cum[k] = counts[k] + (k > 0 ? cum[k - 1] : 0);

        std::vector<std::vector<double>> out(n + 1, std::vector<double>(observables_.size(), 0.0));
        for (std::size_t k = 0; k <= n; ++k) {
            for (std::size_t j = 0; j < observables_.size(); ++j) {
                out[k][j] = value(observables_[j], k, w, cum, h, path);
            }
        }
        return out;
    }

    std::vector<double> state(const ScenarioPath& path, std::size_t node) const { return states(path).at(node); }

private:
    InformationFlow(FlowKind kind, std::vector<Observable> obs, std::size_t window_steps)
        : kind_(kind), observables_(std::move(obs)), window_steps_(window_steps) {
        if (window_steps_ == 0) throw ConfigurationError("information flow: window must span at least one step");
        const bool any_anticipating = std::any_of(observables_.begin(), observables_.end(), is_anticipating);
        if (kind_ != FlowKind::anticipating && any_anticipating) {
            throw ConfigurationError("information flow: anticipating observables require an anticipating flow");
        }
        if (kind_ == FlowKind::partial) {
            if (!contained_in(InformationFlow::full({Observable::window_count}, window_steps_))) {
                throw ConfigurationError("information flow: partial flow must be a subset of the full flow");
            }
        }
    }

    static std::vector<Observable> base() {
        return {Observable::wiener, Observable::poisson_count, Observable::default_count};
    }

    double value(Observable o, std::size_t k, const std::vector<double>& w, const std::vector<std::size_t>& cum,
                 const std::vector<std::size_t>& h, const ScenarioPath& path) const {
        const std::size_t n = path.grid.n_steps();
        const std::size_t e = window_steps_;
        switch (o) {
            case Observable::wiener: return w[k];
            case Observable::poisson_count: return static_cast<double>(cum[k]);
            case Observable::default_count: return static_cast<double>(h[k]);
            case Observable::window_count: {
                const std::size_t lo = k >= e ? k - e : 0;
                return static_cast<double>(cum[k] - cum[lo]);
            }
            case Observable::poisson_forward: {
                const std::size_t hi = std::min(k + e, n);
                double v = static_cast<double>(cum[hi] - cum[k]);
                for (const auto& m : path.lookahead_marks) {
                    if (m.node <= k + e) v += 1.0;
                }
                return v;
            }
            case Observable::wiener_forward_sign: {
                // W is frozen after T
                const std::size_t hi = std::min(k + e, n);
                return w[hi] - w[k] >= 0.0 ? 1.0 : -1.0;
            }
        }
        return 0.0;
    }

    FlowKind kind_;
    std::vector<Observable> observables_;
    std::size_t window_steps_;
};

}  // namespace fwdopt
