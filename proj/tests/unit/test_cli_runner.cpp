#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>

#include "fwdopt/runner/experiment.hpp"
#include "fwdopt/runner/presets.hpp"

using namespace fwdopt;
using namespace fwdopt::runner;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("fwdopt_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ExperimentConfig preset_config(const std::string& name) { return parse_config(find_preset(name).config); }

std::string csv_column(const std::string& csv, std::size_t col) {
    std::istringstream in(csv);
    std::string line, out;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string cell;
        for (std::size_t k = 0; k <= col; ++k) std::getline(row, cell, ',');
        out += cell + "\n";
    }
    return out;
}

int run_cli(const std::string& args) {
    const int status = std::system((std::string(FWDOPT_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Presets, AllPresetsValidate) {
    const auto presets = list_presets();
    EXPECT_GE(presets.size(), 7u);
    std::set<std::string> names;
    for (const auto& p : presets) {
        EXPECT_TRUE(names.insert(p.name).second) << p.name;
        EXPECT_NO_THROW(parse_config(p.config)) << p.name;
        EXPECT_FALSE(p.description.empty());
    }
    for (const char* required : {"figure1", "pathology", "merton", "after_default", "anticipating_compensator",
                                 "martingale_audit", "partial_info"}) {
        EXPECT_TRUE(names.count(required)) << required;
    }
    EXPECT_THROW(find_preset("nope"), ConfigurationError);
}

TEST(Presets, CompensatorWindowIsOnTheGrid) {
    const auto cfg = preset_config("anticipating_compensator");
    EXPECT_EQ(cfg.grid().steps_for(cfg.compensator_epsilon, "eps"), 50u);
}

TEST(Config, UnknownKeyIsRejectedWithItsPath) {
    auto j = find_preset("merton").config;
    j["grid"]["bogus"] = 1;
    try {
        parse_config(j);
        FAIL() << "expected ConfigurationError";
    } catch (const ConfigurationError& e) {
        EXPECT_NE(std::string(e.what()).find("/grid/bogus"), std::string::npos) << e.what();
    }
}

TEST(Config, InconsistentCombinationsAreRejected) {
    auto hidden = find_preset("merton").config;
    hidden["default"] = {{"type", "independent"}, {"lambda_states", {0.1, 1.0}}, {"prior", {0.5, 0.5}}};
    EXPECT_THROW(parse_config(hidden), ConfigurationError);
    auto window = find_preset("merton").config;
    window["default"] = {{"type", "window_trigger"}, {"epsilon", 0.1}};
    EXPECT_THROW(parse_config(window), ConfigurationError);
    auto bad_eps = find_preset("anticipating_compensator").config;
    bad_eps["compensator"]["epsilon"] = 0.0013;
    EXPECT_THROW(parse_config(bad_eps), ConfigurationError);
    auto neg_sigma = find_preset("merton").config;
    neg_sigma["coefficients"]["sigma"] = -0.1;
    EXPECT_THROW(parse_config(neg_sigma), ConfigurationError);
}

TEST(Runner, ReferenceModeIsByteIdentical) {
    for (const char* name : {"figure1", "pathology"}) {
        const auto a = scratch(std::string(name) + "_a");
        const auto b = scratch(std::string(name) + "_b");
        RunOverrides oa{a.string(), std::nullopt, std::size_t{2000}, true};
        RunOverrides ob{b.string(), std::nullopt, std::size_t{2000}, true};
        const auto ma = run_experiment(preset_config(name), oa);
        const auto mb = run_experiment(preset_config(name), ob);
        ASSERT_EQ(ma.files.size(), mb.files.size());
        for (std::size_t k = 0; k < ma.files.size(); ++k) {
            EXPECT_EQ(ma.files[k].path, mb.files[k].path);
            EXPECT_EQ(ma.files[k].sha256, mb.files[k].sha256) << ma.files[k].path;
        }
    }
}

TEST(Runner, WorkerCountDoesNotChangeOutputs) {
    auto one = find_preset("pathology").config;
    one["ensemble"]["paths"] = 3000;
    one["ensemble"]["workers"] = 1;
    auto four = one;
    four["ensemble"]["workers"] = 4;
    const auto a = scratch("workers_1"), b = scratch("workers_4");
    run_experiment(parse_config(one), {a.string(), std::nullopt, std::nullopt, false});
    run_experiment(parse_config(four), {b.string(), std::nullopt, std::nullopt, false});
    EXPECT_EQ(read_bytes(a / "pathology.csv"), read_bytes(b / "pathology.csv"));
}

TEST(Runner, ManifestListsHashedFiles) {
    const auto dir = scratch("manifest");
    const auto m = run_experiment(preset_config("figure1"), {dir.string(), std::nullopt, std::nullopt, true});
    EXPECT_EQ(m.experiment, "figure1");
    EXPECT_EQ(m.config_sha256.size(), 64u);
    EXPECT_EQ(m.workers, 1u);
    EXPECT_FALSE(m.any_failed());
    ASSERT_FALSE(m.files.empty());
    for (const auto& f : m.files) EXPECT_EQ(sha256_hex(read_bytes(dir / f.path)), f.sha256) << f.path;
    const auto j = nlohmann::json::parse(read_bytes(dir / "manifest.json"));
    EXPECT_EQ(j["files"].size(), m.files.size());
    EXPECT_EQ(j["version"], kVersion);
    EXPECT_TRUE(j["reference_mode"].get<bool>());
}

TEST(Runner, EmptyMarketPolicyIsZero) {
    const auto dir = scratch("empty_market");
    const auto m = run_experiment(preset_config("empty_market"), {dir.string(), std::nullopt, std::nullopt, true});
    const std::string csv = read_bytes(dir / "policy.csv");
    ASSERT_EQ(csv.substr(0, csv.find('\n')), "interval,t,regime,pi");
    std::istringstream pis(csv_column(csv, 3));
    std::string v;
    int rows = 0;
    while (std::getline(pis, v)) {
        EXPECT_EQ(std::stod(v), 0.0);
        ++rows;
    }
    EXPECT_GT(rows, 0);
    EXPECT_FALSE(m.any_failed());
}

TEST(Runner, PortfolioOutputsAndAudit) {
    const auto dir = scratch("merton");
    const auto m = run_experiment(preset_config("merton"), {dir.string(), std::nullopt, std::size_t{4000}, true});
    for (const char* f : {"policy.csv", "wealth.csv", "summary.csv", "audit.csv", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    const std::string policy = read_bytes(dir / "policy.csv");
    std::istringstream pis(csv_column(policy, 3));
    std::string v;
    std::getline(pis, v);
    EXPECT_NEAR(std::stod(v), 0.06 / 0.04, 1e-10);
    bool has_martingale = false;
    for (const auto& verdict : m.verdicts) has_martingale = has_martingale || verdict.name == "martingale";
    EXPECT_TRUE(has_martingale);
}

TEST(Runner, InadmissiblePolicyNamesTheConfigPath) {
    auto j = find_preset("martingale_audit").config;
    j["solver"] = {{"method", "constant"}, {"value", 5.0}};
    j["ensemble"]["paths"] = 50;
    j.erase("audit");
    j["outputs"]["directory"] = scratch("inadmissible").string();
    try {
        run_experiment(parse_config(j));
        FAIL() << "expected RunError";
    } catch (const RunError& e) {
        EXPECT_EQ(e.config_path(), "/solver");
    }
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    EXPECT_EQ(run_cli("validate merton"), 0);
    EXPECT_EQ(run_cli("validate /nonexistent/config.json"), 1);
    EXPECT_EQ(run_cli("presets"), 0);
    EXPECT_EQ(run_cli("run figure1 --reference --out " + (dir / "fig").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "fig" / "figure1_uncompensated.csv"));
    EXPECT_EQ(run_cli("presets --write " + (dir / "configs").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "configs" / "merton.json"));
    EXPECT_EQ(run_cli("validate " + (dir / "configs" / "partial_info.json").string()), 0);
    EXPECT_NE(run_cli("bogus"), 0);
}
