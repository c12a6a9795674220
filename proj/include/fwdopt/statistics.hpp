#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include <boost/math/distributions/normal.hpp>

namespace fwdopt {

/// Neumaier-compensated summation; order-dependent but bit-stable for a fixed order.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Welford accumulator for mean / variance / standard error.
class RunningStats {
public:
    void add(double x) {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }

    /// Associative merge (Chan et al.) so per-worker accumulators can be combined.
    void merge(const RunningStats& other) {
        if (other.n_ == 0) return;
        if (n_ == 0) {
            *this = other;
            return;
        }
        const double total = static_cast<double>(n_ + other.n_);
        const double delta = other.mean_ - mean_;
        mean_ += delta * static_cast<double>(other.n_) / total;
        m2_ += other.m2_ + delta * delta * static_cast<double>(n_) * static_cast<double>(other.n_) / total;
        n_ += other.n_;
    }

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double stddev() const { return std::sqrt(variance()); }
    double std_error() const {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : std::numeric_limits<double>::infinity();
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

inline RunningStats summarize(std::span<const double> xs) {
    RunningStats s;
    for (double x : xs) s.add(x);
    return s;
}

inline double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

/// Two-sided critical |z| at family-wise level alpha over n_tests comparisons.
inline double bonferroni_critical_z(double alpha, std::size_t n_tests) {
    const double k = static_cast<double>(std::max<std::size_t>(n_tests, 1));
    return normal_quantile(1.0 - alpha / (2.0 * k));
}

/// z-score of an estimate against a target; zero spread with exact agreement counts as z = 0.
inline double z_score(double estimate, double target, double std_error) {
    const double diff = estimate - target;
    if (std_error > 0.0 && std::isfinite(std_error)) return diff / std_error;
    if (diff == 0.0) return 0.0;
    return diff > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

}  // namespace fwdopt
