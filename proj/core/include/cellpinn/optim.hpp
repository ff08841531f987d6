#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cellpinn {

class Model;

/// Adam with a step-decay learning rate: lr(m) = lr0 * decay^floor(m / interval).
struct OptimizerConfig {
    double initial_lr = 0.005;
    double decay = 0.4;
    int decay_interval = 800;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;

    friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

double lr_at(const OptimizerConfig& config, int step);

/// First/second moments congruent with a flat parameter array.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;

    explicit AdamState(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}
};

/// One bias-corrected Adam update of every entry whose mask byte is set.
/// Masked-out entries and their moments are not touched. Throws TrainingError on
/// a non-finite gradient (before anything is written) or a non-finite result.
void adam_update(const OptimizerConfig& config, AdamState& state, std::span<double> params,
                 std::span<const double> grads, std::span<const std::uint8_t> mask, double lr);

/// Adam step on a model's trainable parameters followed by alias synchronization.
void adam_step(const OptimizerConfig& config, AdamState& state, Model& model,
               std::span<const double> grads, double lr);

}  // namespace cellpinn
