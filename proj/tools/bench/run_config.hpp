#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <cellpinn/trainer.hpp>

namespace cellpinn::bench {

/// Everything needed to reproduce a run. Stored as flat `key = value` text.
struct RunConfig {
    std::string problem = "exp1";
    double epsilon = 0.125;
    ModelSpec model;
    TrainingConfig training;
    int oracle_n = 500;
    double oracle_tolerance = 1e-10;
    int jobs = 1;
    std::string out = "runs/latest";

    void validate() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// All recognized keys in serialization order.
const std::vector<std::string>& config_keys();

/// Default MLP head for a model kind (the plain baseline differs from the cell head).
MlpConfig default_mlp(ModelKind kind);

/// Applies overrides to `base`. A `model` key resets the MLP to that kind's
/// defaults before the remaining keys are applied, so explicit MLP keys win.
/// Unknown keys and malformed values throw ConfigError.
RunConfig apply_overrides(RunConfig base, const KeyValues& values);

/// `key = value` lines; '#' starts a comment.
KeyValues parse_key_values(const std::string& text);
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string serialize(const RunConfig& config);

/// Short CI schedule: 600 steps, 3000 interior points, decay every 80 steps.
void apply_smoke(RunConfig& config);

/// Printf-style formatting with 17 significant digits.
std::string format_double(double v);

}  // namespace cellpinn::bench
