#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fwdopt/runner/config.hpp"
#include "fwdopt/runner/experiment.hpp"
#include "fwdopt/runner/output.hpp"
#include "fwdopt/runner/presets.hpp"

namespace fr = fwdopt::runner;

namespace {

// A config argument is either a file or the name of a preset.
fr::ExperimentConfig load(const std::string& arg) {
    if (std::filesystem::exists(arg)) return fr::load_config(arg);
    for (const auto& p : fr::list_presets()) {
        if (p.name == arg) return fr::parse_config(p.config);
    }
    throw fwdopt::ConfigurationError(arg + ": no such file or preset");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Portfolio optimization experiments with default risk and anticipating information"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run an experiment and write its tables, plots and manifest");
    std::string run_config;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    bool reference = false;
    run->add_option("config", run_config, "Config file or preset name")->required();
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--seed", seed, "Master seed");
    run->add_option("--paths", paths, "Number of simulated paths")->check(CLI::Range(2ul, 100000000ul));
    run->add_flag("--reference", reference, "Single worker, bit-stable output");

    auto* presets = app.add_subcommand("presets", "List the built-in presets");
    std::optional<std::string> write_dir;
    presets->add_option("--write", write_dir, "Write each preset as <name>.json into this directory");

    auto* validate = app.add_subcommand("validate", "Check a config file against the schema");
    std::string validate_config;
    validate->add_option("config", validate_config, "Config file or preset name")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*presets) {
            for (const auto& p : fr::list_presets()) {
                std::printf("%-26s %s\n", p.name.c_str(), p.description.c_str());
                if (write_dir) {
                    std::filesystem::create_directories(*write_dir);
                    fr::write_text(std::filesystem::path(*write_dir) / (p.name + ".json"), p.config.dump(2) + "\n");
                }
            }
            return 0;
        }
        if (*validate) {
            const auto cfg = load(validate_config);
            std::printf("%s: valid (%s)\n", validate_config.c_str(), cfg.experiment.c_str());
            return 0;
        }
        const auto cfg = load(run_config);
        const fr::RunManifest m = fr::run_experiment(cfg, {out_dir, seed, paths, reference});
        for (const auto& f : m.files) std::printf("wrote %s\n", f.path.c_str());
        for (const auto& v : m.verdicts) {
            std::printf("%-26s %s%s%s\n", v.name.c_str(), fwdopt::to_string(v.verdict).c_str(),
                        v.detail.empty() ? "" : "  ", v.detail.c_str());
        }
        std::printf("%.2fs\n", m.wall_clock_seconds);
        return m.any_failed() ? 2 : 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
