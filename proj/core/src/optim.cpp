#include "cellpinn/optim.hpp"

#include <cmath>
#include <string>

#include "cellpinn/error.hpp"
#include "cellpinn/model.hpp"

namespace cellpinn {

void OptimizerConfig::validate() const {
    if (!(initial_lr > 0.0)) throw ContractViolation("optimizer: initial_lr must be > 0");
    if (!(decay > 0.0 && decay < 1.0)) throw ContractViolation("optimizer: decay must be in (0, 1)");
    if (decay_interval < 1) throw ContractViolation("optimizer: decay_interval must be >= 1");
}

double lr_at(const OptimizerConfig& config, int step) {
    if (step < 0) throw ContractViolation("lr_at: step must be >= 0");
    return config.initial_lr * std::pow(config.decay, step / config.decay_interval);
}

void adam_update(const OptimizerConfig& config, AdamState& state, std::span<double> params,
                 std::span<const double> grads, std::span<const std::uint8_t> mask, double lr) {
    const std::size_t n = params.size();
    if (grads.size() != n || mask.size() != n) throw ContractViolation("adam: size mismatch");
    if (state.m.size() != n) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
    }
    const std::int64_t t = state.step + 1;
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));

    // Validate first so a failing step leaves the parameters untouched.
    for (std::size_t k = 0; k < n; ++k) {
        if (mask[k] && !std::isfinite(grads[k])) {
            throw TrainingError("adam: non-finite gradient at parameter " + std::to_string(k));
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (!mask[k]) continue;
        const double g = grads[k];
        state.m[k] = config.beta1 * state.m[k] + (1.0 - config.beta1) * g;
        state.v[k] = config.beta2 * state.v[k] + (1.0 - config.beta2) * g * g;
        const double mhat = state.m[k] / c1;
        const double vhat = state.v[k] / c2;
        params[k] -= lr * mhat / (std::sqrt(vhat) + config.epsilon);
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (mask[k] && !std::isfinite(params[k])) {
            throw TrainingError("adam: non-finite parameter after update at " + std::to_string(k));
        }
    }
    state.step = t;
}

void adam_step(const OptimizerConfig& config, AdamState& state, Model& model,
               std::span<const double> grads, double lr) {
    adam_update(config, state, model.parameters(), grads, model.trainable_mask(), lr);
    model.synchronize_aliases();
}

}  // namespace cellpinn
