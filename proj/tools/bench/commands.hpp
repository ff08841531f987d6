#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <cellpinn/trainer.hpp>

#include "bench/run_config.hpp"

namespace cellpinn::bench {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitTraining = 2, kExitOracle = 3 };

/// Maps a thrown exception to the documented process exit code.
int exit_code_for(const std::exception& e);

struct RunOutcome {
    TrialSummary summary;
    double seconds = 0.0;
    std::filesystem::path dir;
};

/// Trains every trial of `config` and writes into config.out:
///   config.txt, summary.txt and per trial trial_<k>/{history.csv, field.csv,
///   difference.csv, checkpoint.bin} (fields only for trials that finished).
RunOutcome execute_run(const RunConfig& config, std::ostream& log);

int cmd_run(const RunConfig& config, std::ostream& log);

inline const std::vector<std::string> kSweepAxes = {"lambda", "max_resolution", "levels", "batch",
                                                    "hidden_layers"};

/// One run per value under config.out/<axis>_<value>, plus config.out/sweep.csv
/// with columns value,nrmse_min,nrmse_mean,nrmse_max,failures,wall_seconds.
int cmd_sweep(const RunConfig& config, const std::string& axis,
              const std::vector<std::string>& values, std::ostream& log);

/// Ensures the reference field for (problem, n, tolerance) exists in the cache.
int cmd_oracle(const std::string& problem, double epsilon, int cells, double tolerance,
               const std::filesystem::path& cache_dir, std::ostream& log);

/// CSV comparison table of finished run directories.
int cmd_report(const std::vector<std::filesystem::path>& runs, std::ostream& out,
               std::ostream& log);

}  // namespace cellpinn::bench
