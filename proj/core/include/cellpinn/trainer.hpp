#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cellpinn/grid.hpp"
#include "cellpinn/mlp.hpp"
#include "cellpinn/model.hpp"
#include "cellpinn/optim.hpp"
#include "cellpinn/problems.hpp"
#include "cellpinn/reference.hpp"

namespace cellpinn {

enum class Scheme { Coupled, Decoupled, Periodic };

std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);

struct TrainingConfig {
    Scheme scheme = Scheme::Decoupled;
    double lambda = 1e5;  // boundary penalty weight (coupled)
    int interior_batch = 30000;
    int boundary_batch = 2000;
    int phase1_max_steps = 2000;
    double phase1_threshold = 1e-8;
    int steps = 6000;  // energy-minimization steps
    std::uint64_t seed = 0;
    int trials = 10;
    int eval_n = 101;        // trace grid
    int final_eval_n = 501;  // final report grid
    int eval_interval = 100;
    int monitor_interior = 4096;  // fixed samples for traced loss values
    int monitor_boundary = 512;
    OptimizerConfig optimizer;         // energy steps
    OptimizerConfig phase1_optimizer;  // decoupled boundary fit

    void validate() const;

    friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

struct HistoryRecord {
    std::int64_t step = 0;  // global step (phase 1 and 2 counted consecutively)
    int phase = 0;          // 0 single-task, 1 boundary fit, 2 interior energy
    double energy = 0.0;
    double boundary_loss = 0.0;
    double lr = 0.0;
    double nrmse = 0.0;
    double pbc_gap = 0.0;  // periodic scheme only
};

struct TrainingHistory {
    std::vector<HistoryRecord> records;
    std::vector<std::string> warnings;
    EvalReport final;
    bool failed = false;
    std::string failure;
    int phase1_steps = 0;
    double phase1_final_loss = 0.0;
    double seconds = 0.0;
    double step_seconds = 0.0;  // mean wall time of an energy step
    AdamState optimizer;        // moments of the last phase
};

/// Minimizes E + lambda * L_DBC over all parameters with fresh batches each step.
TrainingHistory train_coupled(Model& model, const ProblemSpec& problem,
                              const TrainingConfig& config, const ReferenceSet& refs, Rng& rng);

/// Phase 1 fits the Dirichlet data; boundary nodes and the MLP are then frozen
/// and phase 2 minimizes the interior energy alone.
TrainingHistory train_decoupled(Model& model, const ProblemSpec& problem,
                                const TrainingConfig& config, const ReferenceSet& refs, Rng& rng);

/// Energy minimization on a model with periodic parameter sharing.
TrainingHistory train_periodic(Model& model, const ProblemSpec& problem,
                               const TrainingConfig& config, const ReferenceSet& refs, Rng& rng);

/// Dispatches on config.scheme.
TrainingHistory train(Model& model, const ProblemSpec& problem, const TrainingConfig& config,
                      const ReferenceSet& refs, Rng& rng);

/// max |u(0,y) - u(1,y)| and |u(y,0) - u(y,1)| over `samples` random y.
double periodic_gap(const Model& model, int samples, Rng& rng);

struct ModelSpec {
    ModelKind kind = ModelKind::CellMlp;
    GridConfig grid;
    MlpConfig mlp;
    int single_grid_resolution = 90;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Builds and initializes a model; `periodic` enables parameter sharing.
Model build_model(const ModelSpec& spec, bool periodic, Rng& rng);

struct TrialResult {
    std::uint64_t seed = 0;
    TrainingHistory history;
    std::optional<Model> model;
    bool failed = false;
    std::string error;
};

struct TrialSummary {
    std::vector<TrialResult> trials;
    double min = 0.0, mean = 0.0, max = 0.0;
    int failures = 0;

    int succeeded() const { return static_cast<int>(trials.size()) - failures; }
    std::vector<double> nrmse_values() const;
};

/// Seeds seed, seed+1, ... for `count` trials.
std::vector<std::uint64_t> trial_seeds(std::uint64_t seed, int count);

/// One trial: the model is built from Rng(seed) and that stream then drives sampling.
TrialResult run_trial(const ModelSpec& spec, const ProblemSpec& problem,
                      const TrainingConfig& config, const ReferenceSet& refs, std::uint64_t seed);

/// Independent trials over `seeds` on up to `jobs` worker threads. Failed
/// trials are recorded and excluded from the statistics. `on_done` is called
/// from the worker that finished the trial.
TrialSummary run_trials(const ModelSpec& spec, const ProblemSpec& problem,
                        const TrainingConfig& config, const ReferenceSet& refs,
                        const std::vector<std::uint64_t>& seeds, int jobs = 1,
                        const std::function<void(std::size_t, const TrialResult&)>& on_done = {});

}  // namespace cellpinn
