#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fwdopt/forward_calculus.hpp"
#include "fwdopt/optimal_control.hpp"
#include "fwdopt/optimality_audit.hpp"
#include "fwdopt/runner/config.hpp"
#include "fwdopt/runner/output.hpp"
#include "fwdopt/statistics.hpp"

namespace fwdopt::runner {

inline constexpr const char* kVersion = "1.0.0";

/// A module error tagged with the config path it traces back to.
class RunError : public std::runtime_error {
public:
    RunError(std::string path, const std::string& message)
        : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
    const std::string& config_path() const { return path_; }

private:
    std::string path_;
};

struct RunOverrides {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    bool reference = false;
};

struct OutputFile {
    std::string path;
    std::string sha256;
};

struct Verdict {
    std::string name;
    AuditVerdict verdict = AuditVerdict::inconclusive;
    std::string detail;
};

struct RunManifest {
    std::string name;
    std::string experiment;
    std::string config_sha256;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    std::size_t workers = 1;
    bool reference = false;
    std::string version = kVersion;
    std::vector<OutputFile> files;
    double wall_clock_seconds = 0.0;
    std::vector<Verdict> verdicts;

    bool any_failed() const {
        for (const auto& v : verdicts) {
            if (v.verdict == AuditVerdict::fail) return true;
        }
        return false;
    }

    json to_json() const {
        json j;
        j["name"] = name;
        j["experiment"] = experiment;
        j["config_sha256"] = config_sha256;
        j["seed"] = seed;
        j["paths"] = paths;
        j["workers"] = workers;
        j["reference_mode"] = reference;
        j["version"] = version;
        j["wall_clock_seconds"] = wall_clock_seconds;
        j["files"] = json::array();
        for (const auto& f : files) j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}});
        j["verdicts"] = json::array();
        for (const auto& v : verdicts) {
            j["verdicts"].push_back({{"name", v.name}, {"verdict", to_string(v.verdict)}, {"detail", v.detail}});
        }
        return j;
    }
};

/// Applies command-line overrides to the document and re-validates it, so the
/// config hash covers exactly what ran.
inline ExperimentConfig apply_overrides(const ExperimentConfig& cfg, const RunOverrides& o) {
    json j = cfg.source;
    if (o.seed) j["ensemble"]["seed"] = *o.seed;
    if (o.paths) j["ensemble"]["paths"] = *o.paths;
    if (o.reference) j["ensemble"]["workers"] = 1;
    if (o.out_dir) j["outputs"]["directory"] = *o.out_dir;
    return parse_config(j);
}

namespace detail {

template <class Fn>
auto at_path(const std::string& path, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const RunError&) {
        throw;
    } catch (const std::exception& e) {
        throw RunError(path, e.what());
    }
}

class Writer {
public:
    Writer(std::filesystem::path dir, RunManifest& manifest) : dir_(std::move(dir)), manifest_(manifest) {
        std::filesystem::create_directories(dir_);
    }

    void write(const std::string& name, const std::string& text) {
        write_text(dir_ / name, text);
        manifest_.files.push_back({name, sha256_hex(text)});
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    RunManifest& manifest_;
};

inline std::size_t index_of(const InformationFlow& flow, Observable o) {
    const auto& obs = flow.observables();
    for (std::size_t k = 0; k < obs.size(); ++k) {
        if (obs[k] == o) return k;
    }
    return obs.size();
}

inline std::vector<double> lambda_grid(const SolverSpec& s) {
    std::vector<double> out(s.lambda_count);
    for (std::size_t k = 0; k < s.lambda_count; ++k) {
        out[k] = s.lambda_start + (s.lambda_stop - s.lambda_start) * static_cast<double>(k) /
                                      static_cast<double>(s.lambda_count - 1);
    }
    return out;
}

// ----- figure1 ---------------------------------------------------------------

inline void run_figure1(const ExperimentConfig& cfg, Writer& out, RunManifest& m) {
    const double mu = cfg.coefficients.mu.value;
    const double sigma = cfg.coefficients.sigma.value;
    const double kappa = cfg.coefficients.kappa.value;
    const auto grid = lambda_grid(cfg.solver);
    const auto unc = at_path("/solver/lambda_grid",
                             [&] { return figure1_sweep(Figure1Model::uncompensated, mu, sigma, kappa, grid); });
    const auto com = at_path("/solver/lambda_grid",
                             [&] { return figure1_sweep(Figure1Model::compensated, mu, sigma, kappa, grid); });
    CsvTable a{{"lambda", "pi"}, {}};
    CsvTable b{{"lambda", "pi"}, {}};
    Series su{"uncompensated", {}, {}};
    Series sc{"compensated", {}, {}};
    bool decreasing = true;
    bool compensated_decreasing = true;
    bool ordered = true;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        a.add({unc[k].lambda, unc[k].pi});
        b.add({com[k].lambda, com[k].pi});
        su.x.push_back(unc[k].lambda);
        su.y.push_back(unc[k].pi);
        sc.x.push_back(com[k].lambda);
        sc.y.push_back(com[k].pi);
        if (k > 0 && !(unc[k].pi < unc[k - 1].pi) && kappa != 0.0) decreasing = false;
        if (k > 0 && !(com[k].pi < com[k - 1].pi) && kappa != 0.0) compensated_decreasing = false;
        if (unc[k].lambda > 0.0 && kappa < 0.0 && !(com[k].pi > unc[k].pi)) ordered = false;
    }
    out.write("figure1_uncompensated.csv", a.str());
    out.write("figure1_compensated.csv", b.str());
    if (cfg.plots) {
        out.write("figure1.svg", svg_line_chart("Optimal fraction versus default intensity", "lambda", "pi*", {su, sc}));
    }
    m.verdicts.push_back({"uncompensated_decreasing", decreasing ? AuditVerdict::pass : AuditVerdict::fail, ""});
    m.verdicts.push_back(
        {"compensated_decreasing", compensated_decreasing ? AuditVerdict::pass : AuditVerdict::fail, ""});
    if (kappa < 0.0) {
        m.verdicts.push_back({"compensated_above", ordered ? AuditVerdict::pass : AuditVerdict::fail, ""});
    }
}

// ----- pathology -------------------------------------------------------------

inline void run_pathology(const ExperimentConfig& cfg, Writer& out, RunManifest& m) {
    const auto rows = at_path("/pathology", [&] {
        return divergence_pathology(cfg.grid(), cfg.pathology_n, cfg.paths, cfg.seed, cfg.workers);
    });
    CsvTable t{{"n", "mean", "std_error", "expected", "z", "scaled_mean", "scaled_std_error", "scaled_expected"}, {}};
    Series mean{"sample mean", {}, {}};
    Series law{"sqrt(2n/pi)", {}, {}};
    double worst = 0.0;
    for (const auto& r : rows) {
        const double z = z_score(r.mean, r.expected, r.std_error);
        worst = std::max(worst, std::abs(z));
        t.add({static_cast<long long>(r.n), r.mean, r.std_error, r.expected, z, r.scaled_mean, r.scaled_std_error,
               r.scaled_expected});
        mean.x.push_back(static_cast<double>(r.n));
        mean.y.push_back(r.mean);
        law.x.push_back(static_cast<double>(r.n));
        law.y.push_back(r.expected);
    }
    out.write("pathology.csv", t.str());
    if (cfg.plots) {
        out.write("pathology.svg", svg_line_chart("Expected gain of the sign strategy", "n", "E[gain]", {mean, law}));
    }
    m.verdicts.push_back({"divergence_law", worst <= 3.0 ? AuditVerdict::pass : AuditVerdict::fail,
                          "max |z| = " + format_number(worst)});
}

// ----- compensator -----------------------------------------------------------

inline void run_compensator(const ExperimentConfig& cfg, Writer& out, RunManifest& m) {
    const auto rep = at_path("/compensator", [&] {
        return compensator_estimate(cfg.gamma, cfg.compensator_epsilon, cfg.grid(), cfg.paths, cfg.seed, cfg.workers);
    });
    CsvTable t{{"process", "state", "observations", "events", "rate", "std_error", "formula", "z", "conclusive"}, {}};
    bool fail = false;
    bool inconclusive = false;
    double worst = 0.0;
    auto row = [&](const char* process, int state, const HazardEstimate& h) {
        const double z = h.std_error > 0.0 ? (h.rate - h.formula) / h.std_error : 0.0;
        t.add({std::string(process), static_cast<long long>(state), static_cast<long long>(h.observations),
               static_cast<long long>(h.events), h.rate, h.std_error, h.formula, z,
               std::string(h.conclusive ? "yes" : "no")});
        if (!h.conclusive) {
            inconclusive = true;
            return;
        }
        worst = std::max(worst, std::abs(z));
        if (std::abs(z) > 3.0) fail = true;
    };
    for (int s = 0; s < 2; ++s) row("N", s, rep.lambda_n[s]);
    for (int s = 0; s < 2; ++s) row("H", s, rep.lambda_h[s]);
    out.write("compensator.csv", t.str());
    m.verdicts.push_back({"compensator_formulas",
                          fail ? AuditVerdict::fail : (inconclusive ? AuditVerdict::inconclusive : AuditVerdict::pass),
                          "max |z| = " + format_number(worst)});
}

// ----- portfolio -------------------------------------------------------------

struct Posterior {
    double mean = 0.0;
    double variance = 0.0;
};

/// Law of lambda given H(t_k) = h under the discrete prior and Bernoulli(lambda dt) thinning.
inline Posterior posterior_lambda(const DefaultSpec& d, double dt, std::size_t k, std::size_t h) {
    std::vector<double> logw(d.lambda_states.size());
    double top = -INFINITY;
    for (std::size_t j = 0; j < logw.size(); ++j) {
        const double p = d.lambda_states[j] * dt;
        if (d.prior[j] <= 0.0 || (p <= 0.0 && h > 0) || p >= 1.0) {
            logw[j] = -INFINITY;
            continue;
        }
        logw[j] = std::log(d.prior[j]) + (h > 0 ? static_cast<double>(h) * std::log(p) : 0.0) +
                  static_cast<double>(k - std::min(k, h)) * std::log1p(-p);
        top = std::max(top, logw[j]);
    }
    if (!std::isfinite(top)) throw NumericalError("posterior: observed default count has zero likelihood");
    double m1 = 0.0;
    double m2 = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < logw.size(); ++j) {
        if (!std::isfinite(logw[j])) continue;
        const double w = std::exp(logw[j] - top);
        m1 += w * d.lambda_states[j];
        m2 += w * d.lambda_states[j] * d.lambda_states[j];
        den += w;
    }
    const double mean = m1 / den;
    return {mean, std::max(0.0, m2 / den - mean * mean)};
}

struct PolicyTable {
    Policy policy;
    CsvTable table{{"interval", "t", "regime", "pi"}, {}};
};

inline PolicyTable build_policy(const ExperimentConfig& cfg, const ModelCoefficients& c, const InformationFlow& flow) {
    const TimeGrid g = cfg.grid();
    const std::size_t n = g.n_steps();
    const std::size_t h_index = index_of(flow, Observable::default_count);
    const bool sees_h = h_index < flow.dimension();
    PolicyTable out;
    if (cfg.solver.method == "constant") {
        out.policy = constant_policy(cfg.solver.value);
        for (std::size_t i = 0; i < n; ++i) out.table.add({static_cast<long long>(i), g.time(i), 0LL, cfg.solver.value});
        return out;
    }
    if (cfg.solver.method == "partial_info") {
        if (!sees_h) throw RunError("/information/observables", "partial_info needs default_count");
        const DefaultSpec d = cfg.default_spec;
        const double dt = g.dt();
        const double shift = cfg.solver.shift;
        const ModelCoefficients cc = c;
        auto solve = [d, dt, cc](std::size_t i, std::size_t h) {
            const CoefficientValues v = cc.at(i, h > 0);
            const double lam = posterior_lambda(d, dt, i, h).mean;
            const double s2 = v.sigma * v.sigma;
            return solve_partial_info({v.mu - v.rho + v.kappa * lam, (v.mu - v.rho) * v.kappa - s2, s2 * v.kappa, v.kappa});
        };
        out.policy = [solve, h_index, shift](std::size_t i, const std::vector<double>& s) {
            return solve(i, static_cast<std::size_t>(std::llround(s[h_index]))) + shift;
        };
        at_path("/solver", [&] {
            for (std::size_t h = 0; h <= 1; ++h) {
                for (std::size_t i = 0; i < n; ++i) {
                    out.table.add({static_cast<long long>(i), g.time(i), static_cast<long long>(h), solve(i, h) + shift});
                }
            }
            return 0;
        });
        return out;
    }

    // full information: one value per (regime, interval)
    const std::vector<double> lambda = cfg.default_spec.type == "none"
                                           ? std::vector<double>(n, 0.0)
                                           : cfg.default_spec.lambda.sample(g, "/default/lambda");
    const bool single_default = cfg.default_spec.type == "after_default";
    std::vector<std::vector<double>> table(2, std::vector<double>(n, 0.0));
    at_path("/solver", [&] {
        for (int r = 0; r < 2; ++r) {
            for (std::size_t i = 0; i < n; ++i) {
                FirstOrderCondition foc = FirstOrderCondition::from_coefficients(c, i, r == 1, lambda[i]);
                if (r == 1 && single_default) {
                    foc.kappa = 0.0;
                    foc.lambda = 0.0;
                }
                double p;
                if (foc.jumps.empty() && foc.sigma2 > 0.0) {
                    const CoefficientValues v = c.at(i, r == 1);
                    p = solve_full_info(v.mu, v.rho, v.sigma, foc.kappa, foc.lambda);
                } else {
                    const RootResult res = solve_general(foc);
                    if (res.verdict != RootVerdict::interior) {
                        throw InfeasibleError(to_string(res.verdict) + " on interval " + std::to_string(i));
                    }
                    p = res.pi;
                }
                table[static_cast<std::size_t>(r)][i] = p + cfg.solver.shift;
            }
        }
        return 0;
    });
    const int regimes = sees_h && cfg.default_spec.type != "none" ? 2 : 1;
    for (int r = 0; r < regimes; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
            out.table.add({static_cast<long long>(i), g.time(i), static_cast<long long>(r),
                           table[static_cast<std::size_t>(r)][i]});
        }
    }
    out.policy = [table, h_index, sees_h](std::size_t i, const std::vector<double>& s) {
        const bool defaulted = sees_h && s[h_index] > 0.5;
        return table[defaulted ? 1 : 0][i];
    };
    return out;
}

inline std::function<int(const std::vector<double>&)> make_bucketer(const std::string& by, const InformationFlow& flow) {
    if (by == "none") return [](const std::vector<double>&) { return 0; };
    const std::size_t h = index_of(flow, Observable::default_count);
    if (h >= flow.dimension()) throw RunError("/audit/bucket_by", "the flow does not observe default_count");
    if (by == "default") return [h](const std::vector<double>& s) { return s[h] > 0.5 ? 1 : 0; };
    const std::size_t w = index_of(flow, Observable::wiener);
    if (w >= flow.dimension()) throw RunError("/audit/bucket_by", "the flow does not observe wiener");
    return [h, w](const std::vector<double>& s) { return 2 * (s[h] > 0.5 ? 1 : 0) + (s[w] > 0.0 ? 1 : 0); };
}

inline void run_portfolio(const ExperimentConfig& cfg, Writer& out, RunManifest& m) {
    const TimeGrid g = cfg.grid();
    const std::size_t n = g.n_steps();
    const ModelCoefficients c = cfg.build_coefficients();
    const InformationFlow flow = cfg.build_flow();
    const Utility utility = cfg.build_utility();
    const StoppingKind stopping = cfg.stopping_kind();
    PolicyTable pol = build_policy(cfg, c, flow);
    out.write("policy.csv", pol.table.str());

    std::vector<TestWindow> windows;
    std::function<int(const std::vector<double>&)> bucketer;
    if (cfg.audit.enabled) {
        const std::size_t h_steps = g.steps_for(cfg.audit.h, "audit h");
        for (double t : cfg.audit.times) windows.push_back({t > 0.0 ? g.steps_for(t, "audit time") : 0, h_steps});
        bucketer = make_bucketer(cfg.audit.bucket_by, flow);
    }
    const bool partial = cfg.solver.method == "partial_info";
    std::vector<std::size_t> posterior_nodes;
    if (partial) {
        for (std::size_t k = 0; k <= 4; ++k) posterior_nodes.push_back(k * n / 4);
    }
    const std::size_t h_index = index_of(flow, Observable::default_count);

    const std::size_t np = cfg.paths;
    std::vector<std::vector<double>> m_paths(np);
    std::vector<std::vector<double>> wealth(np);
    std::vector<double> marginal(np), log_terminal(np), drawn(np, 0.0);
    std::vector<std::vector<int>> buckets(np);
    std::vector<std::vector<double>> h_at(np);
    at_path("/ensemble", [&] {
        parallel_for(np, cfg.workers, [&](std::size_t p) {
            const std::uint64_t seed = path_seed(cfg.seed, p);
            const DefaultMechanism mech = cfg.build_mechanism(seed, &drawn[p]);
            const ScenarioPath path = simulate_scenario(g, c.nu, c.truncation_index, mech, seed);
            const StopResult stop = apply_stopping(stopping, path, evaluate_asset(c, path));
            const AdmissibilityResult adm = check_admissibility(pol.policy, flow, c, path);
            if (!adm.admissible()) throw RunError("/solver", "policy is not admissible: " + adm.violations.front().message);
            const CriterionPath crit = build_criterion(adm.portfolio, c, path, stop, utility, cfg.initial_wealth);
            wealth[p] = evaluate_wealth(adm.portfolio, c, path, stop, cfg.initial_wealth).pre_stop;
            log_terminal[p] = std::log(crit.terminal_wealth);
            marginal[p] = crit.marginal;
            m_paths[p] = crit.m_pi;
            if (!windows.empty()) buckets[p] = bucket_labels(flow, path, windows, bucketer);
            if (partial) {
                const auto states = flow.states(path);
                for (std::size_t k : posterior_nodes) h_at[p].push_back(states[k][h_index]);
            }
        });
        return 0;
    });

    CsvTable w{{"node", "t", "mean_wealth", "std_error"}, {}};
    Series mean_wealth{"E[X(t)]", {}, {}};
    for (std::size_t k = 0; k <= n; ++k) {
        RunningStats s;
        for (std::size_t p = 0; p < np; ++p) s.add(wealth[p][k]);
        w.add({static_cast<long long>(k), g.time(k), s.mean(), s.std_error()});
        mean_wealth.x.push_back(g.time(k));
        mean_wealth.y.push_back(s.mean());
    }
    out.write("wealth.csv", w.str());
    if (cfg.plots) out.write("wealth.svg", svg_line_chart("Mean wealth", "t", "E[X(t)]", {mean_wealth}));
    {
        RunningStats s;
        for (double v : log_terminal) s.add(v);
        CsvTable t{{"metric", "value", "std_error"}, {}};
        t.add({std::string("expected_log_terminal_wealth"), s.mean(), s.std_error()});
        out.write("summary.csv", t.str());
    }

    if (!windows.empty()) {
        const auto audit = at_path("/audit", [&] {
            return martingale_test(m_paths, normalize_weights(marginal), windows, buckets, cfg.audit.significance,
                                   cfg.audit.min_bucket);
        });
        CsvTable a{{"bucket", "t", "h", "count", "mean", "std_error", "z", "tested"}, {}};
        for (const auto& cell : audit.cells) {
            a.add({static_cast<long long>(cell.bucket), g.time(cell.t_node),
                   static_cast<double>(cell.h_steps) * g.dt(), static_cast<long long>(cell.count), cell.mean,
                   cell.std_error, cell.z, std::string(cell.tested ? "yes" : "no")});
        }
        out.write("audit.csv", a.str());
        m.verdicts.push_back({"martingale", audit.verdict,
                              "max |z| = " + format_number(audit.max_abs_z) + " (signed " +
                                  format_number(audit.worst_z) + "), critical " + format_number(audit.critical_z) +
                                  ", " + std::to_string(audit.tests) + " tests"});
    }

    if (partial) {
        // the standard error comes from the Bayes posterior variance, so a bucket whose
        // draws all coincide still gets a finite z
        CsvTable t{{"t", "h", "count", "estimate", "bayes", "bayes_std_error", "z"}, {}};
        bool fail = false;
        for (std::size_t j = 0; j < posterior_nodes.size(); ++j) {
            std::vector<std::vector<double>> states(np);
            for (std::size_t p = 0; p < np; ++p) states[p] = {h_at[p][j]};
            const ConditionalFit fit = estimate_conditional(drawn, states, {});
            for (const auto& [key, v] : fit.buckets) {
                const std::size_t h = static_cast<std::size_t>(std::llround(static_cast<double>(key[0]) * 1e-9));
                std::size_t count = 0;
                for (std::size_t p = 0; p < np; ++p) count += std::llround(h_at[p][j]) == static_cast<long long>(h);
                const Posterior post = posterior_lambda(cfg.default_spec, g.dt(), posterior_nodes[j], h);
                const double se = std::sqrt(post.variance / static_cast<double>(count));
                const double z = se > 0.0 ? (v.first - post.mean) / se : 0.0;
                if (count >= 100 && std::abs(z) > 4.0) fail = true;
                t.add({g.time(posterior_nodes[j]), static_cast<long long>(h), static_cast<long long>(count), v.first,
                       post.mean, se, z});
            }
        }
        out.write("posterior.csv", t.str());
        m.verdicts.push_back({"posterior", fail ? AuditVerdict::fail : AuditVerdict::pass, ""});
    }
}

}  // namespace detail

/// Runs one experiment and writes its tables, plots and manifest.json into the output directory.
inline RunManifest run_experiment(const ExperimentConfig& input, const RunOverrides& overrides = {}) {
    const auto start = std::chrono::steady_clock::now();
    const ExperimentConfig cfg = apply_overrides(input, overrides);
    RunManifest m;
    m.name = cfg.name;
    m.experiment = cfg.experiment;
    m.config_sha256 = sha256_hex(cfg.source.dump());
    m.seed = cfg.seed;
    m.paths = cfg.paths;
    m.reference = overrides.reference;
    m.workers = cfg.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.workers;
    detail::Writer out(cfg.output_directory, m);
    if (cfg.experiment == "figure1") {
        detail::run_figure1(cfg, out, m);
    } else if (cfg.experiment == "pathology") {
        detail::run_pathology(cfg, out, m);
    } else if (cfg.experiment == "compensator") {
        detail::run_compensator(cfg, out, m);
    } else {
        detail::run_portfolio(cfg, out, m);
    }
    m.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text(out.dir() / "manifest.json", m.to_json().dump(2) + "\n");
    return m;
}

}  // namespace fwdopt::runner
