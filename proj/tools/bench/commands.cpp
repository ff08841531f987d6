#include "bench/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <ostream>

#include <cellpinn/checkpoint.hpp>
#include <cellpinn/error.hpp>

#include "bench/artifacts.hpp"

namespace cellpinn::bench {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const OracleError*>(&e)) return kExitOracle;
    if (dynamic_cast<const TrainingError*>(&e)) return kExitTraining;
    return kExitUsage;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string trial_dir_name(std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "trial_%02zu", k);
    return buf;
}

std::string reference_label(const ReferenceSet& refs) {
    if (refs.final.source == ReferenceSource::Analytic) return "analytic";
    char buf[96];
    std::snprintf(buf, sizeof buf, "finite-difference n=%d tol=%.3g", refs.final.fd_cells,
                  refs.final.solver_tolerance);
    return buf;
}

void write_trial(const fs::path& dir, const RunConfig& config, const ReferenceSet& refs,
                 const TrialResult& r) {
    fs::create_directories(dir);
    write_file(dir / "history.csv", history_csv(r.history));
    if (r.failed) {
        write_file(dir / "error.txt", r.error + "\n");
        return;
    }
    const Model& model = *r.model;
    const int n = refs.final.points_per_side;
    const auto u = evaluate_model_on_grid(model, n, refs.gauge_fix);
    std::vector<double> diff(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) diff[k] = u[k] - refs.final.values[k];
    write_file(dir / "field.csv", field_csv(n, u));
    write_file(dir / "difference.csv", field_csv(n, diff));
    RunConfig trial_cfg = config;
    trial_cfg.training.seed = r.seed;
    const std::int64_t steps = r.history.records.empty() ? 0 : r.history.records.back().step;
    save_checkpoint(dir / "checkpoint.bin", model, r.history.optimizer, steps, serialize(trial_cfg));
}

}  // namespace

RunOutcome execute_run(const RunConfig& config, std::ostream& log) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const ProblemSpec problem = make_problem(config.problem, config.epsilon);

    std::optional<ReferenceField> oracle;
    if (!problem.has_analytic()) {
        OracleCache cache(OracleCache::default_dir());
        bool hit = false;
        oracle = cache.get_or_solve(problem, config.oracle_n, config.oracle_tolerance, &hit);
        log << "[oracle] " << (hit ? "cache hit " : "solved and cached ")
            << cache.entry_path(problem, config.oracle_n, config.oracle_tolerance).string() << '\n';
    }
    const ReferenceSet refs = make_reference_set(problem, config.training.eval_n,
                                                 config.training.final_eval_n,
                                                 oracle ? &*oracle : nullptr);

    const fs::path dir = config.out;
    fs::create_directories(dir);
    write_file(dir / "config.txt", serialize(config));

    const auto seeds = trial_seeds(config.training.seed, config.training.trials);
    log << "[run] " << config.problem << ' ' << to_string(config.training.scheme) << ' '
        << to_string(config.model.kind) << ": " << seeds.size() << " trial(s), " << config.training.steps
        << " steps, interior batch " << config.training.interior_batch << '\n';
    std::mutex log_mu;
    RunOutcome outcome;
    outcome.dir = dir;
    outcome.summary = run_trials(
        config.model, problem, config.training, refs, seeds, config.jobs,
        [&](std::size_t k, const TrialResult& r) {
            write_trial(dir / trial_dir_name(k), config, refs, r);
            std::lock_guard<std::mutex> lock(log_mu);
            if (r.failed) {
                log << "[run]   trial " << k << " seed " << r.seed << " FAILED: " << r.error << '\n';
            } else {
                log << "[run]   trial " << k << " seed " << r.seed << " nrmse "
                    << format_double(r.history.final.nrmse) << " (" << r.history.seconds << " s)\n";
            }
            for (const auto& w : r.history.warnings) log << "[run]   trial " << k << " warning: " << w << '\n';
        });
    outcome.seconds = seconds_since(t0);

    const TrialSummary& s = outcome.summary;
    Report rep;
    rep["problem"] = config.problem;
    rep["model"] = to_string(config.model.kind);
    rep["scheme"] = to_string(config.training.scheme);
    rep["trials"] = std::to_string(s.trials.size());
    rep["succeeded"] = std::to_string(s.succeeded());
    rep["failures"] = std::to_string(s.failures);
    rep["nrmse_min"] = format_double(s.min);
    rep["nrmse_mean"] = format_double(s.mean);
    rep["nrmse_max"] = format_double(s.max);
    rep["eval_n"] = std::to_string(refs.trace.points_per_side);
    rep["final_eval_n"] = std::to_string(refs.final.points_per_side);
    rep["gauge_fixed"] = refs.gauge_fix ? "true" : "false";
    rep["reference"] = reference_label(refs);
    rep["wall_seconds"] = format_double(outcome.seconds);
    double step_s = 0.0;
    for (std::size_t k = 0; k < s.trials.size(); ++k) {
        const auto& t = s.trials[k];
        const std::string p = "trial." + trial_dir_name(k).substr(6) + ".";
        rep[p + "seed"] = std::to_string(t.seed);
        rep[p + "status"] = t.failed ? "failed" : "ok";
        rep[p + "nrmse"] = t.failed ? "nan" : format_double(t.history.final.nrmse);
        rep[p + "seconds"] = format_double(t.history.seconds);
        rep[p + "step_seconds"] = format_double(t.history.step_seconds);
        if (config.training.scheme == Scheme::Decoupled) {
            rep[p + "phase1_steps"] = std::to_string(t.history.phase1_steps);
        }
        step_s += t.history.step_seconds;
    }
    rep["step_seconds_mean"] = format_double(step_s / static_cast<double>(s.trials.size()));
    rep["status"] = s.succeeded() > 0 ? "complete" : "failed";
    for (const auto& [k, v] : parse_key_values(serialize(config))) rep["config." + k] = v;
    write_file(dir / "summary.txt", format_report(rep));

    log << "[run] nrmse min " << format_double(s.min) << " mean " << format_double(s.mean) << " max "
        << format_double(s.max) << "; " << s.failures << " failure(s); " << outcome.seconds << " s\n";
    return outcome;
}

int cmd_run(const RunConfig& config, std::ostream& log) {
    const RunOutcome o = execute_run(config, log);
    return o.summary.succeeded() > 0 ? kExitOk : kExitTraining;
}

namespace {

KeyValues sweep_overrides(const RunConfig& config, const std::string& axis, const std::string& value) {
    if (axis == "lambda") return {{"lambda", value}};
    if (axis == "levels") return {{"levels", value}};
    if (axis == "batch") return {{"interior_batch", value}};
    if (axis == "hidden_layers") return {{"hidden_layers", value}};
    if (axis == "max_resolution") {
        if (config.model.kind == ModelKind::SingleGrid) return {{"single_grid_resolution", value}};
        return {{"max_resolution", value}};
    }
    throw ConfigError("unknown sweep axis '" + axis + "' (expected lambda|max_resolution|levels|batch|hidden_layers)");
}

}  // namespace

int cmd_sweep(const RunConfig& config, const std::string& axis,
              const std::vector<std::string>& values, std::ostream& log) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    std::vector<RunConfig> points;
    for (const auto& v : values) {
        RunConfig c = apply_overrides(config, sweep_overrides(config, axis, v));
        c.out = (fs::path(config.out) / (axis + "_" + v)).string();
        c.validate();
        points.push_back(std::move(c));
    }
    fs::create_directories(config.out);
    std::string csv = "value,nrmse_min,nrmse_mean,nrmse_max,failures,wall_seconds\n";
    const std::string nan = format_double(std::numeric_limits<double>::quiet_NaN());
    int ok_points = 0;
    for (std::size_t k = 0; k < points.size(); ++k) {
        log << "[sweep] " << axis << " = " << values[k] << '\n';
        try {
            const RunOutcome o = execute_run(points[k], log);
            const auto& s = o.summary;
            csv += values[k] + ',' + format_double(s.min) + ',' + format_double(s.mean) + ',' +
                   format_double(s.max) + ',' + std::to_string(s.failures) + ',' +
                   format_double(o.seconds) + '\n';
            if (s.succeeded() > 0) ++ok_points;
        } catch (const TrainingError& e) {
            log << "[sweep] " << axis << " = " << values[k] << " failed: " << e.what() << '\n';
            csv += values[k] + ',' + nan + ',' + nan + ',' + nan + ',' +
                   std::to_string(points[k].training.trials) + ',' + nan + '\n';
        }
        write_file(fs::path(config.out) / "sweep.csv", csv);
    }
    return ok_points > 0 ? kExitOk : kExitTraining;
}

int cmd_oracle(const std::string& problem_name, double epsilon, int cells, double tolerance,
               const fs::path& cache_dir, std::ostream& log) {
    if (cells < 8) throw ConfigError("oracle: n must be >= 8");
    const ProblemSpec problem = make_problem(problem_name, epsilon);
    OracleCache cache(cache_dir);
    const auto t0 = std::chrono::steady_clock::now();
    bool hit = false;
    const ReferenceField f = cache.get_or_solve(problem, cells, tolerance, &hit);
    const auto path = cache.entry_path(problem, cells, tolerance);
    if (hit) {
        log << "[oracle] cache hit " << path.string() << '\n';
    } else {
        log << "[oracle] solved " << problem.name << " n=" << cells << " in " << seconds_since(t0)
            << " s; wrote " << path.string() << '\n';
    }
    if (problem.has_analytic()) {
        const auto exact = analytic_field(problem, f.points_per_side);
        log << "[oracle] nrmse vs closed form " << format_double(nrmse(exact.values, f.values)) << '\n';
    }
    return kExitOk;
}

int cmd_report(const std::vector<fs::path>& runs, std::ostream& out, std::ostream& log) {
    if (runs.empty()) throw ConfigError("report needs at least one run directory");
    out << "run,problem,model,scheme,trials,nrmse_min,nrmse_mean,nrmse_max,wall_seconds,status\n";
    for (const auto& dir : runs) {
        const auto path = dir / "summary.txt";
        std::error_code ec;
        if (!fs::exists(path, ec)) {
            log << "[report] " << dir.string() << ": no summary.txt\n";
            out << dir.string() << ",,,,,,,,,incomplete\n";
            continue;
        }
        Report r;
        try {
            r = parse_report(read_file(path));
        } catch (const ConfigError& e) {
            log << "[report] " << dir.string() << ": " << e.what() << '\n';
            out << dir.string() << ",,,,,,,,,incomplete\n";
            continue;
        }
        auto get = [&](const char* k) {
            const auto it = r.find(k);
            return it == r.end() ? std::string() : it->second;
        };
        std::string status = get("status");
        for (const char* k : {"problem", "model", "scheme", "nrmse_mean"}) {
            if (get(k).empty()) status = "incomplete";
        }
        out << dir.string() << ',' << get("problem") << ',' << get("model") << ',' << get("scheme") << ','
            << get("trials") << ',' << get("nrmse_min") << ',' << get("nrmse_mean") << ','
            << get("nrmse_max") << ',' << get("wall_seconds") << ',' << status << '\n';
    }
    return kExitOk;
}

}  // namespace cellpinn::bench
