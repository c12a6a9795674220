#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fwdopt/errors.hpp"
#include "fwdopt/information_flow.hpp"
#include "fwdopt/levy_measure.hpp"
#include "fwdopt/market_model.hpp"
#include "fwdopt/scenario.hpp"
#include "fwdopt/utility.hpp"

namespace fwdopt::runner {

using json = nlohmann::json;

namespace detail {

inline void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigurationError(path + ": expected an object");
}

inline void expect_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    expect_object(j, path);
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigurationError(path + "/" + key + ": unknown key");
    }
}

inline double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigurationError(path + ": expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigurationError(path + ": must be finite");
    return v;
}

inline double number_or(const json& j, const char* key, const std::string& path, double fallback) {
    return j.contains(key) ? number(j.at(key), path + "/" + key) : fallback;
}

inline std::uint64_t unsigned_or(const json& j, const char* key, const std::string& path, std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigurationError(path + "/" + key + ": expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

inline std::string string_or(const json& j, const char* key, const std::string& path, const std::string& fallback,
                             std::initializer_list<const char*> choices = {}) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_string()) throw ConfigurationError(path + "/" + key + ": expected a string");
    const auto s = v.get<std::string>();
    if (choices.size() > 0) {
        bool ok = false;
        std::string list;
        for (const char* c : choices) {
            ok = ok || s == c;
            list += list.empty() ? c : std::string(", ") + c;
        }
        if (!ok) throw ConfigurationError(path + "/" + key + ": '" + s + "' is not one of {" + list + "}");
    }
    return s;
}

inline std::vector<double> numbers(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigurationError(path + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "/" + std::to_string(i)));
    return out;
}

}  // namespace detail

/// Deterministic time function sampled at the left node of every interval.
struct FunctionSpec {
    std::string type = "constant";
    double value = 0.0;
    double start = 0.0;
    double end = 0.0;
    double mean = 0.0;
    double amplitude = 0.0;
    double period = 1.0;
    std::vector<double> values;

    static FunctionSpec constant(double v) {
        FunctionSpec f;
        f.value = v;
        return f;
    }

    bool is_constant() const { return type == "constant"; }

    std::vector<double> sample(const TimeGrid& grid, const std::string& path) const {
        std::vector<double> out(grid.n_steps());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double t = grid.time(i);
            if (type == "constant") {
                out[i] = value;
            } else if (type == "linear") {
                out[i] = start + (end - start) * t / grid.horizon();
            } else if (type == "sine") {
                out[i] = mean + amplitude * std::sin(2.0 * M_PI * t / period);
            } else {
                if (values.size() != grid.n_steps()) {
                    throw ConfigurationError(path + "/values: expected one value per grid interval (" +
                                             std::to_string(grid.n_steps()) + ")");
                }
                out[i] = values[i];
            }
        }
        return out;
    }

    static FunctionSpec parse(const json& j, const std::string& path) {
        if (j.is_number()) return constant(detail::number(j, path));
        detail::expect_keys(j, path, {"type", "value", "start", "end", "mean", "amplitude", "period", "values"});
        FunctionSpec f;
        f.type = detail::string_or(j, "type", path, "constant", {"constant", "linear", "sine", "table"});
        f.value = detail::number_or(j, "value", path, 0.0);
        f.start = detail::number_or(j, "start", path, 0.0);
        f.end = detail::number_or(j, "end", path, 0.0);
        f.mean = detail::number_or(j, "mean", path, 0.0);
        f.amplitude = detail::number_or(j, "amplitude", path, 0.0);
        f.period = detail::number_or(j, "period", path, 1.0);
        if (!(f.period > 0.0)) throw ConfigurationError(path + "/period: must be positive");
        if (j.contains("values")) f.values = detail::numbers(j.at("values"), path + "/values");
        return f;
    }
};

struct RegimeSpec {
    FunctionSpec rho = FunctionSpec::constant(0.0);
    FunctionSpec mu = FunctionSpec::constant(0.0);
    FunctionSpec sigma = FunctionSpec::constant(0.0);
    FunctionSpec kappa = FunctionSpec::constant(0.0);
    FunctionSpec theta_scale = FunctionSpec::constant(1.0);

    static RegimeSpec parse(const json& j, const std::string& path, const RegimeSpec& base,
                            std::initializer_list<const char*> allowed) {
        detail::expect_keys(j, path, allowed);
        RegimeSpec r = base;
        if (j.contains("rho")) r.rho = FunctionSpec::parse(j.at("rho"), path + "/rho");
        if (j.contains("mu")) r.mu = FunctionSpec::parse(j.at("mu"), path + "/mu");
        if (j.contains("sigma")) r.sigma = FunctionSpec::parse(j.at("sigma"), path + "/sigma");
        if (j.contains("kappa")) r.kappa = FunctionSpec::parse(j.at("kappa"), path + "/kappa");
        if (j.contains("theta_scale")) r.theta_scale = FunctionSpec::parse(j.at("theta_scale"), path + "/theta_scale");
        return r;
    }

    Regime sample(const TimeGrid& grid, const std::string& path) const {
        return {rho.sample(grid, path + "/rho"), mu.sample(grid, path + "/mu"), sigma.sample(grid, path + "/sigma"),
                kappa.sample(grid, path + "/kappa"), theta_scale.sample(grid, path + "/theta_scale")};
    }
};

struct LevySpec {
    bool present = false;
    std::vector<Atom> atoms;
    std::optional<TemperedStableDensity> density;
    std::vector<double> cutoffs;
    std::size_t truncation_index = 1;
};

struct DefaultSpec {
    std::string type = "none";  ///< none | independent | window_trigger | after_default
    FunctionSpec lambda = FunctionSpec::constant(0.0);
    std::vector<double> lambda_states;  ///< hidden two-or-more-state intensity (drawn per path)
    std::vector<double> prior;
    double epsilon = 0.1;
    std::size_t threshold = 2;
};

struct InformationSpec {
    std::string kind = "full";
    std::vector<Observable> observables;
    double window = 0.0;
};

struct SolverSpec {
    std::string method = "full_info";  ///< full_info | partial_info | constant
    double shift = 0.0;
    double value = 0.0;
    double lambda_start = 0.0;
    double lambda_stop = 0.5;
    std::size_t lambda_count = 51;
};

struct AuditSpec {
    bool enabled = false;
    std::vector<double> times;
    double h = 0.0;
    std::string bucket_by = "default_and_wiener_sign";
    double significance = 0.01;
    std::size_t min_bucket = 100;
};

struct ExperimentConfig {
    std::string name;
    std::string description;
    std::string experiment;  ///< figure1 | pathology | portfolio | compensator
    double horizon = 1.0;
    std::size_t n_steps = 50;
    RegimeSpec coefficients;
    std::optional<RegimeSpec> after_default;
    std::string theta_mark = "identity";
    LevySpec levy;
    DefaultSpec default_spec;
    std::string stopping = "first_default";
    double initial_wealth = 1.0;
    InformationSpec information;
    std::string utility = "log";
    double utility_parameter = 0.0;
    SolverSpec solver;
    AuditSpec audit;
    std::vector<std::size_t> pathology_n;
    double gamma = 1.0;
    double compensator_epsilon = 0.1;
    std::size_t paths = 1000;
    std::uint64_t seed = 1;
    std::size_t workers = 0;
    std::string output_directory = "out";
    bool plots = true;
    json source;  ///< the parsed document after overrides

    TimeGrid grid() const { return TimeGrid(horizon, n_steps); }

    /// Market coefficients on the grid; errors carry the config path.
    ModelCoefficients build_coefficients() const {
        const TimeGrid g = grid();
        ModelCoefficients c;
        c.pre = coefficients.sample(g, "/coefficients");
        if (after_default) c.post = after_default->sample(g, "/coefficients/after_default");
        if (levy.present) {
            try {
                c.nu = levy.density ? LevyMeasure::from_density(*levy.density, levy.cutoffs, levy.atoms)
                                    : LevyMeasure::from_atoms(levy.atoms);
            } catch (const ConfigurationError& e) {
                throw ConfigurationError(std::string("/levy_measure: ") + e.what());
            }
            c.truncation_index = levy.truncation_index;
            if (theta_mark == "identity") {
                c.theta_mark = [](double z) { return z; };
            } else if (theta_mark == "sign") {
                c.theta_mark = [](double z) { return z > 0.0 ? 1.0 : -1.0; };
            }
        }
        try {
            c.validate(g);
        } catch (const ConfigurationError& e) {
            throw ConfigurationError(std::string("/coefficients: ") + e.what());
        }
        return c;
    }

    /// Default mechanism for one path; a hidden intensity is drawn from the path's own stream.
    DefaultMechanism build_mechanism(std::uint64_t path_seed_value, double* drawn_lambda = nullptr) const {
        const TimeGrid g = grid();
        const auto& d = default_spec;
        double hidden = 0.0;
        const bool has_hidden = !d.lambda_states.empty();
        if (has_hidden) {
            auto rng = make_engine(path_seed_value, Stream::hidden_state);
            std::discrete_distribution<std::size_t> pick(d.prior.begin(), d.prior.end());
            hidden = d.lambda_states[pick(rng)];
            if (drawn_lambda) *drawn_lambda = hidden;
        }
        auto lambda = [&]() {
            return has_hidden ? std::vector<double>(g.n_steps(), hidden) : d.lambda.sample(g, "/default/lambda");
        };
        if (d.type == "independent") return IndependentIntensity{lambda()};
        if (d.type == "after_default") return AfterDefaultRegime{lambda()};
        if (d.type == "window_trigger") return WindowTrigger{d.epsilon, d.threshold};
        return NoDefault{};
    }

    InformationFlow build_flow() const {
        const TimeGrid g = grid();
        std::size_t w = 1;
        if (information.window > 0.0) {
            try {
                w = g.steps_for(information.window, "window");
            } catch (const ConfigurationError& e) {
                throw ConfigurationError(std::string("/information/window: ") + e.what());
            }
        }
        try {
            if (information.kind == "partial") return InformationFlow::partial(information.observables, w);
            if (information.kind == "anticipating") return InformationFlow::anticipating(information.observables, w);
            return InformationFlow::full(information.observables, w);
        } catch (const ConfigurationError& e) {
            throw ConfigurationError(std::string("/information: ") + e.what());
        }
    }

    Utility build_utility() const {
        try {
            if (utility == "power") return Utility::power(utility_parameter);
            if (utility == "exponential") return Utility::exponential(utility_parameter);
            return Utility::log();
        } catch (const ConfigurationError& e) {
            throw ConfigurationError(std::string("/utility: ") + e.what());
        }
    }

    StoppingKind stopping_kind() const {
        if (stopping == "horizon_only") return StoppingKind::horizon_only;
        if (stopping == "zero_value") return StoppingKind::zero_value;
        return StoppingKind::first_default;
    }
};

namespace detail {

inline LevySpec parse_levy(const json& j, const std::string& path) {
    LevySpec l;
    if (j.is_null()) return l;
    expect_keys(j, path, {"atoms", "density", "cutoffs", "truncation_index"});
    l.present = true;
    if (j.contains("atoms")) {
        const json& a = j.at("atoms");
        if (!a.is_array()) throw ConfigurationError(path + "/atoms: expected an array");
        for (std::size_t i = 0; i < a.size(); ++i) {
            const std::string p = path + "/atoms/" + std::to_string(i);
            expect_keys(a[i], p, {"z", "rate"});
            if (!a[i].contains("z") || !a[i].contains("rate")) throw ConfigurationError(p + ": needs z and rate");
            l.atoms.push_back({number(a[i].at("z"), p + "/z"), number(a[i].at("rate"), p + "/rate")});
        }
    }
    if (j.contains("density")) {
        const std::string p = path + "/density";
        const json& d = j.at("density");
        expect_keys(d, p, {"c_pos", "c_neg", "alpha", "decay_pos", "decay_neg", "z_max"});
        TemperedStableDensity t;
        t.c_pos = number_or(d, "c_pos", p, t.c_pos);
        t.c_neg = number_or(d, "c_neg", p, t.c_neg);
        t.alpha = number_or(d, "alpha", p, t.alpha);
        t.decay_pos = number_or(d, "decay_pos", p, t.decay_pos);
        t.decay_neg = number_or(d, "decay_neg", p, t.decay_neg);
        t.z_max = number_or(d, "z_max", p, t.z_max);
        l.density = t;
        if (!j.contains("cutoffs")) throw ConfigurationError(path + "/cutoffs: required with a density");
    }
    if (j.contains("cutoffs")) l.cutoffs = numbers(j.at("cutoffs"), path + "/cutoffs");
    l.truncation_index = unsigned_or(j, "truncation_index", path, 1);
    if (l.atoms.empty() && !l.density) throw ConfigurationError(path + ": needs atoms or a density");
    return l;
}

inline std::vector<Observable> parse_observables(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigurationError(path + ": expected an array of names");
    std::vector<Observable> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_string()) throw ConfigurationError(path + "/" + std::to_string(i) + ": expected a string");
        try {
            out.push_back(observable_from_string(j[i].get<std::string>()));
        } catch (const ConfigurationError& e) {
            throw ConfigurationError(path + "/" + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace detail

/// Parses and validates a config document; every error names the offending key's path.
inline ExperimentConfig parse_config(const json& j) {
    using namespace detail;
    expect_keys(j, "", {"name", "description", "experiment", "grid", "coefficients", "levy_measure", "default",
                        "stopping", "initial_wealth", "information", "utility", "solver", "audit", "pathology",
                        "compensator", "ensemble", "outputs"});
    ExperimentConfig c;
    c.source = j;
    c.name = string_or(j, "name", "", "experiment");
    c.description = string_or(j, "description", "", "");
    if (!j.contains("experiment")) throw ConfigurationError("/experiment: required");
    c.experiment = string_or(j, "experiment", "", "", {"figure1", "pathology", "portfolio", "compensator"});

    if (j.contains("grid")) {
        const json& g = j.at("grid");
        expect_keys(g, "/grid", {"horizon", "n_steps"});
        c.horizon = number_or(g, "horizon", "/grid", c.horizon);
        c.n_steps = unsigned_or(g, "n_steps", "/grid", c.n_steps);
    }
    try {
        (void)c.grid();
    } catch (const ConfigurationError& e) {
        throw ConfigurationError(std::string("/grid: ") + e.what());
    }

    if (j.contains("coefficients")) {
        const json& k = j.at("coefficients");
        c.coefficients = RegimeSpec::parse(k, "/coefficients", RegimeSpec{},
                                           {"rho", "mu", "sigma", "kappa", "theta_scale", "theta_mark", "after_default"});
        c.theta_mark = string_or(k, "theta_mark", "/coefficients", c.theta_mark, {"identity", "sign"});
        if (k.contains("after_default")) {
            c.after_default = RegimeSpec::parse(k.at("after_default"), "/coefficients/after_default", c.coefficients,
                                                {"rho", "mu", "sigma", "kappa", "theta_scale"});
        }
    }
    if (j.contains("levy_measure")) c.levy = parse_levy(j.at("levy_measure"), "/levy_measure");

    if (j.contains("default")) {
        const json& d = j.at("default");
        expect_keys(d, "/default", {"type", "lambda", "lambda_states", "prior", "epsilon", "threshold"});
        auto& s = c.default_spec;
        s.type = string_or(d, "type", "/default", "none", {"none", "independent", "window_trigger", "after_default"});
        if (d.contains("lambda")) s.lambda = FunctionSpec::parse(d.at("lambda"), "/default/lambda");
        if (d.contains("lambda_states")) s.lambda_states = numbers(d.at("lambda_states"), "/default/lambda_states");
        if (d.contains("prior")) s.prior = numbers(d.at("prior"), "/default/prior");
        if (s.lambda_states.size() != s.prior.size()) {
            throw ConfigurationError("/default/prior: needs one weight per entry of lambda_states");
        }
        for (double p : s.prior) {
            if (p < 0.0) throw ConfigurationError("/default/prior: weights must be >= 0");
        }
        s.epsilon = number_or(d, "epsilon", "/default", s.epsilon);
        s.threshold = unsigned_or(d, "threshold", "/default", s.threshold);
        if (s.type == "window_trigger") {
            if (!c.levy.present) throw ConfigurationError("/default/type: window_trigger needs a levy_measure");
            try {
                (void)lookahead_steps(c.grid(), WindowTrigger{s.epsilon, s.threshold});
            } catch (const ConfigurationError& e) {
                throw ConfigurationError(std::string("/default/epsilon: ") + e.what());
            }
        }
    }
    c.stopping = string_or(j, "stopping", "", c.stopping, {"first_default", "horizon_only", "zero_value"});
    c.initial_wealth = number_or(j, "initial_wealth", "", c.initial_wealth);
    if (!(c.initial_wealth > 0.0)) throw ConfigurationError("/initial_wealth: must be positive");

    if (j.contains("information")) {
        const json& f = j.at("information");
        expect_keys(f, "/information", {"kind", "observables", "window"});
        c.information.kind = string_or(f, "kind", "/information", "full", {"full", "partial", "anticipating"});
        if (f.contains("observables")) {
            c.information.observables = parse_observables(f.at("observables"), "/information/observables");
        }
        c.information.window = number_or(f, "window", "/information", 0.0);
    }
    if (j.contains("utility")) {
        const json& u = j.at("utility");
        expect_keys(u, "/utility", {"type", "parameter"});
        c.utility = string_or(u, "type", "/utility", "log", {"log", "power", "exponential"});
        c.utility_parameter = number_or(u, "parameter", "/utility", 0.0);
    }
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        expect_keys(s, "/solver", {"method", "shift", "value", "lambda_grid"});
        c.solver.method = string_or(s, "method", "/solver", "full_info", {"full_info", "partial_info", "constant"});
        c.solver.shift = number_or(s, "shift", "/solver", 0.0);
        c.solver.value = number_or(s, "value", "/solver", 0.0);
        if (s.contains("lambda_grid")) {
            const json& g = s.at("lambda_grid");
            expect_keys(g, "/solver/lambda_grid", {"start", "stop", "count"});
            c.solver.lambda_start = number_or(g, "start", "/solver/lambda_grid", c.solver.lambda_start);
            c.solver.lambda_stop = number_or(g, "stop", "/solver/lambda_grid", c.solver.lambda_stop);
            c.solver.lambda_count = unsigned_or(g, "count", "/solver/lambda_grid", c.solver.lambda_count);
            if (c.solver.lambda_count < 2) throw ConfigurationError("/solver/lambda_grid/count: must be >= 2");
        }
    }
    if (j.contains("audit")) {
        const json& a = j.at("audit");
        expect_keys(a, "/audit", {"times", "h", "bucket_by", "significance", "min_bucket"});
        c.audit.enabled = true;
        if (a.contains("times")) c.audit.times = numbers(a.at("times"), "/audit/times");
        c.audit.h = number_or(a, "h", "/audit", 0.0);
        c.audit.bucket_by = string_or(a, "bucket_by", "/audit", c.audit.bucket_by,
                                      {"none", "default", "default_and_wiener_sign"});
        c.audit.significance = number_or(a, "significance", "/audit", c.audit.significance);
        c.audit.min_bucket = unsigned_or(a, "min_bucket", "/audit", c.audit.min_bucket);
        const TimeGrid g = c.grid();
        for (std::size_t i = 0; i < c.audit.times.size(); ++i) {
            const double t = c.audit.times[i];
            const std::string p = "/audit/times/" + std::to_string(i);
            if (t < 0.0 || t + c.audit.h > c.horizon + 1e-12) throw ConfigurationError(p + ": window exceeds [0, T]");
            if (t > 0.0) {
                try {
                    (void)g.steps_for(t, "audit time");
                } catch (const ConfigurationError& e) {
                    throw ConfigurationError(p + ": " + e.what());
                }
            }
        }
        try {
            (void)g.steps_for(c.audit.h, "audit h");
        } catch (const ConfigurationError& e) {
            throw ConfigurationError(std::string("/audit/h: ") + e.what());
        }
        if (!(c.audit.significance > 0.0 && c.audit.significance < 1.0)) {
            throw ConfigurationError("/audit/significance: must lie in (0, 1)");
        }
    }
    if (j.contains("pathology")) {
        const json& p = j.at("pathology");
        expect_keys(p, "/pathology", {"n_values"});
        if (p.contains("n_values")) {
            for (double v : numbers(p.at("n_values"), "/pathology/n_values")) {
                if (v < 1.0 || v != std::floor(v) || c.n_steps % static_cast<std::size_t>(v) != 0) {
                    throw ConfigurationError("/pathology/n_values: each n must be a positive divisor of n_steps");
                }
                c.pathology_n.push_back(static_cast<std::size_t>(v));
            }
        }
    }
    if (j.contains("compensator")) {
        const json& p = j.at("compensator");
        expect_keys(p, "/compensator", {"gamma", "epsilon"});
        c.gamma = number_or(p, "gamma", "/compensator", c.gamma);
        c.compensator_epsilon = number_or(p, "epsilon", "/compensator", c.compensator_epsilon);
        if (!(c.gamma > 0.0)) throw ConfigurationError("/compensator/gamma: must be positive");
        try {
            (void)lookahead_steps(c.grid(), WindowTrigger{c.compensator_epsilon, 2});
        } catch (const ConfigurationError& e) {
            throw ConfigurationError(std::string("/compensator/epsilon: ") + e.what());
        }
    }
    if (j.contains("ensemble")) {
        const json& e = j.at("ensemble");
        expect_keys(e, "/ensemble", {"paths", "seed", "workers"});
        c.paths = unsigned_or(e, "paths", "/ensemble", c.paths);
        c.seed = unsigned_or(e, "seed", "/ensemble", c.seed);
        c.workers = unsigned_or(e, "workers", "/ensemble", c.workers);
        if (c.paths < 2) throw ConfigurationError("/ensemble/paths: need at least 2");
    }
    if (j.contains("outputs")) {
        const json& o = j.at("outputs");
        expect_keys(o, "/outputs", {"directory", "plots"});
        c.output_directory = string_or(o, "directory", "/outputs", c.output_directory);
        if (o.contains("plots")) {
            if (!o.at("plots").is_boolean()) throw ConfigurationError("/outputs/plots: expected true or false");
            c.plots = o.at("plots").get<bool>();
        }
    }

    // cross-module checks that would otherwise only surface mid-run
    (void)c.build_coefficients();
    (void)c.build_flow();
    (void)c.build_utility();
    if (c.experiment == "figure1") {
        if (!c.coefficients.mu.is_constant() || !c.coefficients.sigma.is_constant() ||
            !c.coefficients.kappa.is_constant() || !c.coefficients.rho.is_constant() || c.coefficients.rho.value != 0.0) {
            throw ConfigurationError("/coefficients: figure1 needs constant mu, sigma, kappa and rho = 0");
        }
    }
    if (c.experiment == "pathology" && c.pathology_n.empty()) throw ConfigurationError("/pathology/n_values: required");
    if (c.solver.method == "partial_info") {
        if (c.default_spec.lambda_states.empty()) {
            throw ConfigurationError("/default/lambda_states: partial_info needs a hidden intensity");
        }
        if (c.default_spec.type != "independent") {
            throw ConfigurationError("/default/type: partial_info needs an independent intensity");
        }
        if (c.levy.present) throw ConfigurationError("/levy_measure: partial_info supports no Poisson marks");
        if (c.after_default) throw ConfigurationError("/coefficients/after_default: not supported by partial_info");
    } else if (!c.default_spec.lambda_states.empty()) {
        throw ConfigurationError("/default/lambda_states: a hidden intensity needs solver method partial_info");
    }
    if (c.experiment == "portfolio" && c.solver.method == "full_info" && c.default_spec.type == "window_trigger") {
        throw ConfigurationError("/solver/method: full_info needs an intensity-driven default mechanism");
    }
    return c;
}

inline json read_json_file(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigurationError(file + ": cannot open config file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigurationError(file + ": " + e.what());
    }
}

inline ExperimentConfig load_config(const std::string& file) { return parse_config(read_json_file(file)); }

}  // namespace fwdopt::runner
