#pragma once

#include <cmath>
#include <string>

#include "fwdopt/errors.hpp"

namespace fwdopt {

enum class UtilityKind { log, power, exponential };

/// U(x) = ln x, x^{1-c}/(1-c), or -e^{-gamma x}/gamma.
class Utility {
public:
    static Utility log() { return Utility(UtilityKind::log, 0.0); }

    static Utility power(double c) {
        if (!(c > 0.0) || c == 1.0) throw ConfigurationError("power utility: need c > 0 and c != 1");
        return Utility(UtilityKind::power, c);
    }

    static Utility exponential(double gamma) {
        if (!(gamma > 0.0)) throw ConfigurationError("exponential utility: need gamma > 0");
        return Utility(UtilityKind::exponential, gamma);
    }

    UtilityKind kind() const { return kind_; }
    double parameter() const { return param_; }

    std::string name() const {
        switch (kind_) {
            case UtilityKind::log: return "log";
            case UtilityKind::power: return "power";
            case UtilityKind::exponential: return "exponential";
        }
        return "unknown";
    }

    double value(double x) const {
        switch (kind_) {
            case UtilityKind::log: return std::log(x);
            case UtilityKind::power: return std::pow(x, 1.0 - param_) / (1.0 - param_);
            case UtilityKind::exponential: return -std::exp(-param_ * x) / param_;
        }
        return 0.0;
    }

    double d1(double x) const {
        switch (kind_) {
            case UtilityKind::log: return 1.0 / x;
            case UtilityKind::power: return std::pow(x, -param_);
            case UtilityKind::exponential: return std::exp(-param_ * x);
        }
        return 0.0;
    }

    double d2(double x) const {
        switch (kind_) {
            case UtilityKind::log: return -1.0 / (x * x);
            case UtilityKind::power: return -param_ * std::pow(x, -param_ - 1.0);
            case UtilityKind::exponential: return -param_ * std::exp(-param_ * x);
        }
        return 0.0;
    }

    /// U'(x) x, the unnormalized density of the tilted measure.
    double marginal_wealth(double x) const { return d1(x) * x; }

    /// x U''(x) + U'(x) <= 0 on a log-spaced grid over [x_lo, x_hi].
    bool satisfies_risk_aversion_condition(double x_lo = 1e-6, double x_hi = 1e6, int points = 241) const {
        const double tol = 1e-12;
        for (int k = 0; k < points; ++k) {
            const double s = std::log(x_lo) + (std::log(x_hi) - std::log(x_lo)) * k / (points - 1);
            const double x = std::exp(s);
            const double v = x * d2(x) + d1(x);
            if (v > tol * std::abs(d1(x))) return false;
        }
        return true;
    }

private:
    Utility(UtilityKind kind, double param) : kind_(kind), param_(param) {}

    UtilityKind kind_;
    double param_;
};

}  // namespace fwdopt
