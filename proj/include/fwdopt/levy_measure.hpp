#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fwdopt/errors.hpp"
#include "fwdopt/random.hpp"

namespace fwdopt {

/// Point mass of the jump measure: nu({z}) = rate.
struct Atom {
    double z;
    double rate;
};

/// nu(dz) = c_pos z^{-1-alpha} e^{-decay_pos z} dz on (0, z_max] plus the mirrored
/// expression with (c_neg, decay_neg) on [-z_max, 0). Infinite activity when alpha >= 0
/// and c > 0; truncation away from 0 makes every set finite.
struct TemperedStableDensity {
    double c_pos = 0.0;
    double c_neg = 0.0;
    double alpha = 0.5;
    double decay_pos = 1.0;
    double decay_neg = 1.0;
    double z_max = 10.0;
};

/// A finite set of (z, nu-weight) pairs. Integrating f against it approximates
/// (or, for atoms, equals) the integral of f over a truncation set.
struct MarkQuadrature {
    std::vector<double> z;
    std::vector<double> weight;

    template <class F>
    double integrate(F&& f) const {
        double acc = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) acc += weight[j] * f(z[j]);
        return acc;
    }
    double total_mass() const {
        double acc = 0.0;
        for (double w : weight) acc += w;
        return acc;
    }
};

struct QuadratureValue {
    double value;
    double error_estimate;
};

namespace detail {

inline constexpr std::array<double, 8> kGaussNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGaussWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

}  // namespace detail

/// Jump measure nu on R \ {0} with the nested compact truncation sets
/// U_m = {cutoff_m <= |z| <= z_max}, m = 1..truncation_count().
class LevyMeasure {
public:
    static constexpr std::size_t kDefaultPanels = 64;

    static LevyMeasure from_atoms(std::vector<Atom> atoms) {
        LevyMeasure nu;
        nu.atoms_ = std::move(atoms);
        double min_abs = std::numeric_limits<double>::infinity();
        for (const auto& a : nu.atoms_) min_abs = std::min(min_abs, std::abs(a.z));
        nu.cutoffs_ = {std::isfinite(min_abs) ? min_abs : 1.0};
        nu.validate();
        return nu;
    }

    static LevyMeasure from_density(TemperedStableDensity density, std::vector<double> cutoffs,
                                    std::vector<Atom> atoms = {}) {
        LevyMeasure nu;
        nu.density_ = density;
        nu.cutoffs_ = std::move(cutoffs);
        nu.atoms_ = std::move(atoms);
        nu.validate();
        return nu;
    }

    /// The zero measure (no jumps).
    static LevyMeasure none() { return LevyMeasure{}; }

    bool empty() const { return atoms_.empty() && !density_; }
    bool has_density() const { return density_.has_value(); }
    const std::vector<Atom>& atoms() const { return atoms_; }
    const std::optional<TemperedStableDensity>& density() const { return density_; }
    const std::vector<double>& cutoffs() const { return cutoffs_; }
    std::size_t truncation_count() const { return cutoffs_.size(); }

    double cutoff(std::size_t m) const { return cutoffs_.at(check_index(m) - 1); }

    double z_max() const {
        double zm = density_ ? density_->z_max : 0.0;
        for (const auto& a : atoms_) zm = std::max(zm, std::abs(a.z));
        return zm;
    }

    bool in_set(double z, std::size_t m) const {
        const double az = std::abs(z);
        return az >= cutoff(m) && az <= z_max() && z != 0.0;
    }

    /// Quadrature rule over U_m: atoms exactly, density by composite 8-point
    /// Gauss-Legendre in log|z| with `panels` panels per side.
    MarkQuadrature quadrature(std::size_t m, std::size_t panels = kDefaultPanels) const {
        check_index(m);
        MarkQuadrature q;
        for (const auto& a : atoms_) {
            if (in_set(a.z, m)) {
                q.z.push_back(a.z);
                q.weight.push_back(a.rate);
            }
        }
        if (density_) {
            append_density_side(q, cutoff(m), +1.0, density_->c_pos, density_->decay_pos, panels);
            append_density_side(q, cutoff(m), -1.0, density_->c_neg, density_->decay_neg, panels);
        }
        return q;
    }

    /// Integral of f over U_m against nu, with |Q(panels) - Q(panels/2)| as error estimate.
    template <class F>
    QuadratureValue integrate(F&& f, std::size_t m, std::size_t panels = kDefaultPanels) const {
        const double fine = quadrature(m, panels).integrate(f);
        const double coarse = has_density() ? quadrature(m, std::max<std::size_t>(1, panels / 2)).integrate(f) : fine;
        if (!std::isfinite(fine)) {
            throw ConfigurationError("levy measure: quadrature of integrand over U_" + std::to_string(m) +
                                     " is not finite");
        }
        return {fine, std::abs(fine - coarse)};
    }

    QuadratureValue mass(std::size_t m) const {
        return integrate([](double) { return 1.0; }, m);
    }

    /// Integral of z^2 over all of R \ {0} (the m -> infinity limit).
    double second_moment() const {
        double acc = 0.0;
        for (const auto& a : atoms_) acc += a.z * a.z * a.rate;
        if (density_) {
            MarkQuadrature q;
            constexpr double kInner = 1e-14;
            append_density_side(q, kInner, +1.0, density_->c_pos, density_->decay_pos, 256);
            append_density_side(q, kInner, -1.0, density_->c_neg, density_->decay_neg, 256);
            acc += q.integrate([](double z) { return z * z; });
        }
        return acc;
    }

    /// Draws one mark from nu restricted to U_m, normalized to a probability.
    double sample_mark(Engine& rng, std::size_t m) const {
        check_index(m);
        const double atom_mass = atom_mass_in(m);
        double pos_mass = 0.0;
        double neg_mass = 0.0;
        if (density_) {
            pos_mass = side_mass(m, density_->c_pos, density_->decay_pos);
            neg_mass = side_mass(m, density_->c_neg, density_->decay_neg);
        }
        const double total = atom_mass + pos_mass + neg_mass;
        if (!(total > 0.0)) throw ConfigurationError("levy measure: U_m carries no mass");
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double pick = unif(rng) * total;
        if (pick < atom_mass) {
            for (const auto& a : atoms_) {
                if (!in_set(a.z, m)) continue;
                if (pick < a.rate) return a.z;
                pick -= a.rate;
            }
            for (auto it = atoms_.rbegin(); it != atoms_.rend(); ++it) {
                if (in_set(it->z, m)) return it->z;
            }
        }
        pick -= atom_mass;
        if (pick < pos_mass) return sample_side(rng, m, density_->decay_pos);
        return -sample_side(rng, m, density_->decay_neg);
    }

private:
    std::size_t check_index(std::size_t m) const {
        if (m == 0 || m > cutoffs_.size()) {
            throw ConfigurationError("levy measure: truncation index " + std::to_string(m) + " outside 1.." +
                                     std::to_string(cutoffs_.size()));
        }
        return m;
    }

    void validate() const {
        for (const auto& a : atoms_) {
            if (a.z == 0.0 || !std::isfinite(a.z)) throw ConfigurationError("levy measure: atom at z = 0 or non-finite");
            if (!(a.rate > 0.0) || !std::isfinite(a.rate)) {
                throw ConfigurationError("levy measure: atom rates must be positive and finite");
            }
        }
        if (cutoffs_.empty()) throw ConfigurationError("levy measure: at least one truncation set is required");
        for (std::size_t i = 0; i < cutoffs_.size(); ++i) {
            if (!(cutoffs_[i] > 0.0)) throw ConfigurationError("levy measure: truncation cutoffs must be positive");
            if (i > 0 && !(cutoffs_[i] < cutoffs_[i - 1])) {
                throw ConfigurationError("levy measure: truncation cutoffs must strictly decrease (increasing sets)");
            }
        }
        if (density_) {
            const auto& d = *density_;
            if (d.c_pos < 0.0 || d.c_neg < 0.0) throw ConfigurationError("levy measure: density scale must be >= 0");
            if (!(d.alpha >= 0.0 && d.alpha < 2.0)) {
                throw ConfigurationError("levy measure: alpha must lie in [0, 2) for a finite second moment");
            }
            if (d.decay_pos < 0.0 || d.decay_neg < 0.0) throw ConfigurationError("levy measure: decay must be >= 0");
            if (!(d.z_max > cutoffs_.front()) || !std::isfinite(d.z_max)) {
                throw ConfigurationError("levy measure: z_max must be finite and exceed every cutoff");
            }
        }
    }

    double atom_mass_in(std::size_t m) const {
        double acc = 0.0;
        for (const auto& a : atoms_) {
            if (in_set(a.z, m)) acc += a.rate;
        }
        return acc;
    }

    double side_mass(std::size_t m, double c, double decay) const {
        if (c == 0.0) return 0.0;
        MarkQuadrature q;
        append_density_side(q, cutoff(m), +1.0, c, decay, kDefaultPanels);
        return q.total_mass();
    }

    // Inverse-CDF draw from z^{-1-alpha} on [a, b], accepted with e^{-decay (z - a)}.
    double sample_side(Engine& rng, std::size_t m, double decay) const {
        const double a = cutoff(m);
        const double b = density_->z_max;
        const double alpha = density_->alpha;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (;;) {
            const double u = unif(rng);
            double z;
            if (alpha == 0.0) {
                z = a * std::pow(b / a, u);
            } else {
                const double lo = std::pow(a, -alpha);
                const double hi = std::pow(b, -alpha);
                z = std::pow(lo - u * (lo - hi), -1.0 / alpha);
            }
            z = std::clamp(z, a, b);
            if (decay == 0.0 || unif(rng) < std::exp(-decay * (z - a))) return z;
        }
    }

    void append_density_side(MarkQuadrature& q, double lower, double sign, double c, double decay,
                             std::size_t panels) const {
        if (c == 0.0) return;
        const double alpha = density_->alpha;
        const double s_lo = std::log(lower);
        const double s_hi = std::log(density_->z_max);
        const double h = (s_hi - s_lo) / static_cast<double>(panels);
        for (std::size_t p = 0; p < panels; ++p) {
            const double mid = s_lo + (static_cast<double>(p) + 0.5) * h;
            for (std::size_t g = 0; g < detail::kGaussNodes.size(); ++g) {
                const double s = mid + 0.5 * h * detail::kGaussNodes[g];
                const double z = std::exp(s);
                // nu(dz) = c z^{-1-alpha} e^{-decay z} dz = c z^{-alpha} e^{-decay z} ds
                const double w = 0.5 * h * detail::kGaussWeights[g] * c * std::exp(-alpha * s - decay * z);
                q.z.push_back(sign * z);
                q.weight.push_back(w);
            }
        }
    }

    std::vector<Atom> atoms_;
    std::optional<TemperedStableDensity> density_;
    std::vector<double> cutoffs_{1.0};
};

}  // namespace fwdopt
