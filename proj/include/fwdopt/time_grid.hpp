#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fwdopt/errors.hpp"

namespace fwdopt {

/// Uniform discretization 0 = t_0 < t_1 < ... < t_n = T.
///
/// Interval i is (t_i, t_{i+1}]. Integrands are indexed by interval and take
/// the value fixed at the left node; events are indexed by the node that
/// closes the interval they fall in (right-endpoint snapping).
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) {
            throw ConfigurationError("time grid: horizon must be positive and finite");
        }
        if (n_steps == 0) {
            throw ConfigurationError("time grid: n_steps must be at least 1");
        }
        dt_ = horizon_ / static_cast<double>(n_steps_);
    }

    double horizon() const { return horizon_; }
    std::size_t n_steps() const { return n_steps_; }
    std::size_t n_nodes() const { return n_steps_ + 1; }
    double dt() const { return dt_; }

    double time(std::size_t node) const {
        return node == n_steps_ ? horizon_ : static_cast<double>(node) * dt_;
    }

    std::vector<double> nodes() const {
        std::vector<double> out(n_nodes());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = time(k);
        return out;
    }

    /// Node closing the interval that contains t, for t in (0, T]; t = 0 maps to node 0.
    std::size_t snap_right(double t) const {
        if (t <= 0.0) return 0;
        auto k = static_cast<std::size_t>(std::ceil(t / dt_));
        if (k > n_steps_) k = n_steps_;
        if (k == 0) k = 1;
        return k;
    }

    /// Number of whole steps in a duration, or throws if it is not an integer multiple of dt.
    std::size_t steps_for(double duration, const std::string& what) const {
        const double ratio = duration / dt_;
        const double rounded = std::round(ratio);
        if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
            throw ConfigurationError(what + " must be a positive integer multiple of dt");
        }
        return static_cast<std::size_t>(rounded);
    }

    bool operator==(const TimeGrid& other) const {
        return horizon_ == other.horizon_ && n_steps_ == other.n_steps_;
    }

private:
    double horizon_;
    std::size_t n_steps_;
    double dt_;
};

}  // namespace fwdopt
