#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fwdopt/errors.hpp"

namespace fwdopt::runner {

struct Preset {
    std::string name;
    std::string description;
    nlohmann::json config;
};

inline std::vector<Preset> list_presets() {
    using nlohmann::json;
    std::vector<Preset> out;

    out.push_back({"figure1", "Optimal fraction versus default intensity, with and without drift compensation",
                   json::parse(R"({
  "name": "figure1",
  "experiment": "figure1",
  "grid": {"horizon": 1.0, "n_steps": 50},
  "coefficients": {"rho": 0.0, "mu": 0.1, "sigma": 0.3, "kappa": -0.5},
  "solver": {"method": "full_info", "lambda_grid": {"start": 0.0, "stop": 0.5, "count": 51}},
  "outputs": {"directory": "out/figure1"}
})")});

    out.push_back({"pathology", "Expected gain of the look-ahead sign strategy for n = 4, 16, 64, 256",
                   json::parse(R"({
  "name": "pathology",
  "experiment": "pathology",
  "grid": {"horizon": 1.0, "n_steps": 256},
  "pathology": {"n_values": [4, 16, 64, 256]},
  "ensemble": {"paths": 100000, "seed": 20240601},
  "outputs": {"directory": "out/pathology"}
})")});

    out.push_back({"merton", "Diffusion-only market; optimal fraction is the Merton ratio",
                   json::parse(R"({
  "name": "merton",
  "experiment": "portfolio",
  "grid": {"horizon": 1.0, "n_steps": 100},
  "coefficients": {"rho": 0.02, "mu": 0.08, "sigma": 0.2},
  "stopping": "horizon_only",
  "solver": {"method": "full_info"},
  "audit": {"times": [0.0, 0.25, 0.5, 0.75], "h": 0.25, "bucket_by": "none"},
  "ensemble": {"paths": 20000, "seed": 11},
  "outputs": {"directory": "out/merton"}
})")});

    out.push_back({"after_default", "Single default that switches the coefficients to a second regime",
                   json::parse(R"({
  "name": "after_default",
  "experiment": "portfolio",
  "grid": {"horizon": 1.0, "n_steps": 100},
  "coefficients": {"rho": 0.01, "mu": 0.09, "sigma": 0.25, "kappa": -0.3,
                   "after_default": {"mu": 0.05, "sigma": 0.35, "kappa": 0.0}},
  "default": {"type": "after_default", "lambda": 0.3},
  "stopping": "horizon_only",
  "solver": {"method": "full_info"},
  "audit": {"times": [0.0, 0.25, 0.5, 0.75], "h": 0.25, "bucket_by": "default"},
  "ensemble": {"paths": 20000, "seed": 12},
  "outputs": {"directory": "out/after_default"}
})")});

    out.push_back({"anticipating_compensator",
                   "Hazards of N and of a default that looks eps ahead of N, by trailing window state",
                   json::parse(R"({
  "name": "anticipating_compensator",
  "experiment": "compensator",
  "grid": {"horizon": 1.0, "n_steps": 500},
  "compensator": {"gamma": 1.0, "epsilon": 0.1},
  "ensemble": {"paths": 4000, "seed": 13},
  "outputs": {"directory": "out/anticipating_compensator"}
})")});

    out.push_back({"martingale_audit", "Martingale test of the criterion process at the optimum, with defaults",
                   json::parse(R"({
  "name": "martingale_audit",
  "experiment": "portfolio",
  "grid": {"horizon": 1.0, "n_steps": 100},
  "coefficients": {"rho": 0.0, "mu": 0.1, "sigma": 0.3, "kappa": -0.5},
  "default": {"type": "independent", "lambda": 0.1},
  "stopping": "first_default",
  "solver": {"method": "full_info"},
  "audit": {"times": [0.0, 0.25, 0.5, 0.75], "h": 0.25, "bucket_by": "default_and_wiener_sign",
            "significance": 0.01},
  "ensemble": {"paths": 100000, "seed": 14},
  "outputs": {"directory": "out/martingale_audit"}
})")});

    out.push_back({"partial_info", "Hidden two-state default intensity learned from the default count",
                   json::parse(R"({
  "name": "partial_info",
  "experiment": "portfolio",
  "grid": {"horizon": 1.0, "n_steps": 100},
  "coefficients": {"rho": 0.0, "mu": 0.08, "sigma": 0.25, "kappa": -0.4},
  "default": {"type": "independent", "lambda_states": [0.1, 1.5], "prior": [0.5, 0.5]},
  "stopping": "horizon_only",
  "information": {"kind": "partial", "observables": ["default_count"]},
  "solver": {"method": "partial_info"},
  "audit": {"times": [0.0, 0.25, 0.5, 0.75], "h": 0.25, "bucket_by": "default"},
  "ensemble": {"paths": 20000, "seed": 15},
  "outputs": {"directory": "out/partial_info"}
})")});

    out.push_back({"empty_market", "Risky asset identical to the bond; the optimal fraction is zero",
                   json::parse(R"({
  "name": "empty_market",
  "experiment": "portfolio",
  "grid": {"horizon": 1.0, "n_steps": 20},
  "coefficients": {"rho": 0.03, "mu": 0.03, "sigma": 0.0, "kappa": 0.0},
  "stopping": "horizon_only",
  "solver": {"method": "full_info"},
  "ensemble": {"paths": 100, "seed": 16},
  "outputs": {"directory": "out/empty_market"}
})")});
    return out;
}

inline Preset find_preset(const std::string& name) {
    for (auto& p : list_presets()) {
        if (p.name == name) return p;
    }
    throw ConfigurationError("unknown preset '" + name + "'");
}

}  // namespace fwdopt::runner
