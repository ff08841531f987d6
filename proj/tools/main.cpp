#include <exception>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <cellpinn/error.hpp>

#include "bench/commands.hpp"
#include "bench/artifacts.hpp"

namespace {

using namespace cellpinn;
using namespace cellpinn::bench;

struct RunFlags {
    std::string config_file;
    std::map<std::string, std::string> values;
    std::vector<std::string> sets;
    bool smoke = false;
    std::vector<std::pair<std::string, CLI::Option*>> options;

    void attach(CLI::App& app) {
        app.add_option("--config", config_file, "key = value config file (flags override it)");
        app.add_flag("--smoke", smoke, "short schedule: 600 steps, 3000 interior points");
        const std::vector<std::pair<std::string, std::string>> flags = {
            {"problem", "exp1|exp2|exp3|exp4"},
            {"scheme", "coupled|decoupled|periodic"},
            {"model", "cell-mlp|plain-mlp|single-grid"},
            {"levels", "grid levels L"},
            {"max-resolution", "finest grid resolution"},
            {"growth", "per-level resolution growth factor"},
            {"features", "features per grid node"},
            {"hidden-layers", "MLP hidden layers"},
            {"width", "MLP hidden width"},
            {"activation", "sin|tanh"},
            {"lambda", "boundary penalty weight (coupled)"},
            {"steps", "energy-minimization steps"},
            {"interior-batch", "interior samples per step"},
            {"boundary-batch", "boundary samples per step"},
            {"trials", "independent trials"},
            {"seed", "seed of the first trial"},
            {"eval-n", "points per side of the trace grid"},
            {"epsilon", "coefficient length scale (exp2)"},
            {"jobs", "concurrent trials"},
            {"out", "output directory"},
        };
        for (const auto& [name, help] : flags) {
            options.emplace_back(name, app.add_option("--" + name, values[name], help));
        }
        app.add_option("--set", sets, "extra key=value override (repeatable)");
    }

    RunConfig resolve() const {
        RunConfig cfg = config_file.empty() ? RunConfig{} : load_run_config(config_file);
        if (smoke) apply_smoke(cfg);
        KeyValues kv;
        for (const auto& [name, opt] : options) {
            if (opt->count() == 0) continue;
            std::string key = name;
            for (char& c : key) c = c == '-' ? '_' : c;
            kv.emplace_back(key, values.at(name));
        }
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        return apply_overrides(cfg, kv);
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiresolution grid + MLP solvers for Poisson problems"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "train all trials of one configuration");
    RunFlags run_flags;
    run_flags.attach(*run);

    auto* sweep = app.add_subcommand("sweep", "repeat a run over values of one hyperparameter");
    RunFlags sweep_flags;
    sweep_flags.attach(*sweep);
    std::string axis;
    std::vector<std::string> axis_values;
    sweep->add_option("--axis", axis, "lambda|max_resolution|levels|batch|hidden_layers")->required();
    sweep->add_option("--values", axis_values, "comma-separated values")->required()->delimiter(',');

    auto* oracle = app.add_subcommand("oracle", "build or verify a cached finite-difference reference");
    std::string oracle_problem = "exp2";
    int oracle_n = 500;
    double oracle_eps = 0.125;
    double oracle_tol = 1e-10;
    std::string cache_dir = OracleCache::default_dir().string();
    oracle->add_option("--problem", oracle_problem, "exp1|exp2|exp3|exp4");
    oracle->add_option("--n", oracle_n, "cells per side");
    oracle->add_option("--epsilon", oracle_eps, "coefficient length scale (exp2)");
    oracle->add_option("--tolerance", oracle_tol, "CG relative residual");
    oracle->add_option("--cache", cache_dir, "cache directory (default $CELLPINN_ORACLE_CACHE)");

    auto* report = app.add_subcommand("report", "tabulate finished runs as CSV");
    std::vector<std::string> run_dirs;
    report->add_option("runs", run_dirs, "run directories");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*run) return cmd_run(run_flags.resolve(), std::cerr);
        if (*sweep) return cmd_sweep(sweep_flags.resolve(), axis, axis_values, std::cerr);
        if (*oracle) return cmd_oracle(oracle_problem, oracle_eps, oracle_n, oracle_tol, cache_dir, std::cerr);
        if (*report) {
            std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
            return cmd_report(dirs, std::cout, std::cerr);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kExitUsage;
}
