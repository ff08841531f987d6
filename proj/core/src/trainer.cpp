#include "cellpinn/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "cellpinn/error.hpp"

namespace cellpinn {

std::string to_string(Scheme scheme) {
    switch (scheme) {
        case Scheme::Coupled: return "coupled";
        case Scheme::Decoupled: return "decoupled";
        case Scheme::Periodic: return "periodic";
    }
    return "unknown";
}

Scheme parse_scheme(const std::string& name) {
    if (name == "coupled") return Scheme::Coupled;
    if (name == "decoupled") return Scheme::Decoupled;
    if (name == "periodic") return Scheme::Periodic;
    throw ContractViolation("unknown scheme '" + name + "' (expected coupled|decoupled|periodic)");
}

void TrainingConfig::validate() const {
    if (scheme == Scheme::Coupled && !(lambda > 0.0)) {
        throw ContractViolation("lambda must be > 0 for coupled training");
    }
    if (interior_batch < 1 || boundary_batch < 1) throw ContractViolation("batch sizes must be >= 1");
    if (phase1_max_steps < 0) throw ContractViolation("phase1_max_steps must be >= 0");
    if (!(phase1_threshold >= 0.0)) throw ContractViolation("phase1_threshold must be >= 0");
    if (steps < 0) throw ContractViolation("steps must be >= 0");
    if (trials < 1) throw ContractViolation("trials must be >= 1");
    if (eval_n < 2 || final_eval_n < 2) throw ContractViolation("evaluation grids need >= 2 points");
    if (eval_interval < 1) throw ContractViolation("eval_interval must be >= 1");
    if (monitor_interior < 1 || monitor_boundary < 1) {
        throw ContractViolation("monitor sample counts must be >= 1");
    }
    optimizer.validate();
    phase1_optimizer.validate();
}

double periodic_gap(const Model& model, int samples, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Point> a, b;
    a.reserve(2 * static_cast<std::size_t>(samples));
    b.reserve(a.capacity());
    for (int k = 0; k < samples; ++k) {
        const double y = unit(rng);
        a.push_back({0.0, y});
        b.push_back({1.0, y});
        a.push_back({y, 0.0});
        b.push_back({y, 1.0});
    }
    std::vector<double> ua(a.size()), ub(b.size());
    model.evaluate_batch(a, ua);
    model.evaluate_batch(b, ub);
    double gap = 0.0;
    for (std::size_t k = 0; k < ua.size(); ++k) gap = std::max(gap, std::abs(ua[k] - ub[k]));
    return gap;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Fixed sample sets for the traced loss values, drawn from a stream separate
// from the training batches.
struct Monitor {
    std::vector<Point> interior;
    std::vector<Point> boundary;
    Rng gap_rng;

    Monitor(const ProblemSpec& problem, const TrainingConfig& cfg)
        : gap_rng(cfg.seed ^ 0x6a09e667f3bcc909ULL) {
        Rng r(cfg.seed ^ 0xbb67ae8584caa73bULL);
        interior = sample_interior(static_cast<std::size_t>(cfg.monitor_interior), r);
        if (!problem.is_periodic()) {
            boundary = sample_boundary(static_cast<std::size_t>(cfg.monitor_boundary), r);
        }
    }
};

class Run {
public:
    Run(Model& model, const ProblemSpec& problem, const TrainingConfig& cfg,
        const ReferenceSet& refs, Rng& rng)
        : model_(model), problem_(problem), cfg_(cfg), refs_(refs), rng_(rng),
          monitor_(problem, cfg), grad_(model.parameter_count()) {}

    TrainingHistory& history() { return history_; }

    void record(int phase, double lr) {
        HistoryRecord r;
        r.step = step_;
        r.phase = phase;
        r.lr = lr;
        r.energy = energy_estimate(model_, problem_, monitor_.interior);
        if (!problem_.is_periodic()) r.boundary_loss = dirichlet_loss(model_, problem_, monitor_.boundary);
        r.nrmse = refs_.evaluate_trace(model_).nrmse;
        if (problem_.is_periodic()) r.pbc_gap = periodic_gap(model_, 100, monitor_.gap_rng);
        if (!std::isfinite(r.energy) || !std::isfinite(r.boundary_loss) || !std::isfinite(r.nrmse) ||
            !std::isfinite(r.pbc_gap)) {
            throw TrainingError("non-finite trace values at step " + std::to_string(step_));
        }
        history_.records.push_back(r);
    }

    // One optimizer step on the energy (plus the weighted boundary penalty when
    // `penalty` > 0). Returns the mean interior energy of the batch.
    double energy_step(AdamState& state, double lr, double penalty) {
        const auto t0 = Clock::now();
        if (model_.mlp_trainable()) model_.refresh_spectral_norm();
        interior_.resize(static_cast<std::size_t>(cfg_.interior_batch));
        sample_interior(interior_, rng_);
        std::fill(grad_.begin(), grad_.end(), 0.0);
        const double e = model_.accumulate_loss_gradient(interior_, problem_.energy_loss(), 1.0, grad_);
        if (penalty > 0.0) {
            boundary_.resize(static_cast<std::size_t>(cfg_.boundary_batch));
            sample_boundary(boundary_, rng_);
            model_.accumulate_loss_gradient(boundary_, problem_.dirichlet_loss(), penalty, grad_);
        }
        adam_step(cfg_.optimizer, state, model_, grad_, lr);
        ++step_;
        energy_seconds_ += seconds_since(t0);
        ++energy_steps_;
        return e;
    }

    // One step on the boundary loss alone. Returns the pre-update batch loss; the
    // update is skipped once that loss is at or below `threshold`.
    double boundary_step(const OptimizerConfig& opt, AdamState& state, double lr, double threshold,
                         bool& reached) {
        if (model_.mlp_trainable()) model_.refresh_spectral_norm();
        boundary_.resize(static_cast<std::size_t>(cfg_.boundary_batch));
        sample_boundary(boundary_, rng_);
        std::fill(grad_.begin(), grad_.end(), 0.0);
        const double loss =
            model_.accumulate_loss_gradient(boundary_, problem_.dirichlet_loss(), 1.0, grad_);
        reached = loss <= threshold;
        if (reached) return loss;
        adam_step(opt, state, model_, grad_, lr);
        ++step_;
        return loss;
    }

    bool due(int phase_step, int total) const {
        return phase_step % cfg_.eval_interval == 0 || phase_step == total;
    }

    // Runs `body` with timing and failure capture, then the final evaluation.
    template <class Body>
    TrainingHistory finish(Body&& body) {
        const auto t0 = Clock::now();
        try {
            body();
            history_.final = refs_.evaluate_final(model_);
            if (!std::isfinite(history_.final.nrmse)) throw TrainingError("non-finite final NRMSE");
        } catch (const TrainingError& e) {
            history_.failed = true;
            history_.failure = e.what();
        } catch (const MetricError& e) {
            history_.failed = true;
            history_.failure = e.what();
        }
        history_.seconds = seconds_since(t0);
        history_.step_seconds = energy_steps_ ? energy_seconds_ / static_cast<double>(energy_steps_) : 0.0;
        return std::move(history_);
    }

    std::int64_t step() const { return step_; }

private:
    Model& model_;
    const ProblemSpec& problem_;
    const TrainingConfig& cfg_;
    const ReferenceSet& refs_;
    Rng& rng_;
    Monitor monitor_;
    std::vector<double> grad_;
    std::vector<Point> interior_, boundary_;
    TrainingHistory history_;
    std::int64_t step_ = 0;
    double energy_seconds_ = 0.0;
    std::int64_t energy_steps_ = 0;
};

void require_dirichlet(const ProblemSpec& problem, const char* who) {
    if (problem.is_periodic() || !problem.boundary_value) {
        throw UnsupportedError(std::string(who) + " needs a Dirichlet problem; " + problem.name +
                               " is periodic");
    }
}

}  // namespace

TrainingHistory train_coupled(Model& model, const ProblemSpec& problem,
                              const TrainingConfig& config, const ReferenceSet& refs, Rng& rng) {
    config.validate();
    require_dirichlet(problem, "coupled training");
    model.set_trainable(true, true, true);
    Run run(model, problem, config, refs, rng);
    return run.finish([&] {
        const OptimizerConfig& opt = config.optimizer;
        run.record(0, lr_at(opt, 0));
        AdamState state(model.parameter_count());
        for (int s = 0; s < config.steps; ++s) {
            const double lr = lr_at(opt, s);
            run.energy_step(state, lr, config.lambda);
            if (run.due(s + 1, config.steps)) run.record(0, lr);
        }
        run.history().optimizer = std::move(state);
    });
}

TrainingHistory train_decoupled(Model& model, const ProblemSpec& problem,
                                const TrainingConfig& config, const ReferenceSet& refs, Rng& rng) {
    config.validate();
    require_dirichlet(problem, "decoupled training");
    if (model.kind() == ModelKind::PlainMlp) {
        throw UnsupportedError("decoupled training needs a grid model");
    }
    Run run(model, problem, config, refs, rng);
    return run.finish([&] {
        const OptimizerConfig& opt = config.optimizer;
        const OptimizerConfig& opt1 = config.phase1_optimizer;
        model.set_trainable(true, false, true);
        run.record(1, lr_at(opt1, 0));
        if (config.steps == 0) return;

        AdamState phase1(model.parameter_count());
        bool reached = false;
        double loss = 0.0;
        int k = 0;
        for (; k < config.phase1_max_steps; ++k) {
            const double lr = lr_at(opt1, k);
            loss = run.boundary_step(opt1, phase1, lr, config.phase1_threshold, reached);
            if (reached) break;
            if (run.due(k + 1, config.phase1_max_steps)) run.record(1, lr);
        }
        auto& h = run.history();
        h.phase1_steps = k;
        h.phase1_final_loss = loss;
        if (!reached && config.phase1_max_steps > 0) {
            std::ostringstream msg;
            msg << "phase 1 stopped after " << k << " steps with boundary loss " << loss
                << " above threshold " << config.phase1_threshold;
            h.warnings.push_back(msg.str());
        }
        if (h.records.back().step != run.step()) run.record(1, lr_at(opt1, std::max(k - 1, 0)));

        model.set_trainable(false, true, false);
        AdamState phase2(model.parameter_count());
        for (int s = 0; s < config.steps; ++s) {
            const double lr = lr_at(opt, s);
            run.energy_step(phase2, lr, 0.0);
            if (run.due(s + 1, config.steps)) run.record(2, lr);
        }
        run.history().optimizer = std::move(phase2);
    });
}

TrainingHistory train_periodic(Model& model, const ProblemSpec& problem,
                               const TrainingConfig& config, const ReferenceSet& refs, Rng& rng) {
    config.validate();
    if (!problem.is_periodic()) throw UnsupportedError("periodic training needs a periodic problem");
    if (!model.has_sharing()) throw ContractViolation("periodic training needs a model with sharing");
    model.set_trainable(true, true, true);
    Run run(model, problem, config, refs, rng);
    return run.finish([&] {
        const OptimizerConfig& opt = config.optimizer;
        run.record(0, lr_at(opt, 0));
        AdamState state(model.parameter_count());
        for (int s = 0; s < config.steps; ++s) {
            const double lr = lr_at(opt, s);
            run.energy_step(state, lr, 0.0);
            if (run.due(s + 1, config.steps)) run.record(0, lr);
        }
        run.history().optimizer = std::move(state);
    });
}

TrainingHistory train(Model& model, const ProblemSpec& problem, const TrainingConfig& config,
                      const ReferenceSet& refs, Rng& rng) {
    switch (config.scheme) {
        case Scheme::Coupled: return train_coupled(model, problem, config, refs, rng);
        case Scheme::Decoupled: return train_decoupled(model, problem, config, refs, rng);
        case Scheme::Periodic: return train_periodic(model, problem, config, refs, rng);
    }
    throw ContractViolation("unknown scheme");
}

Model build_model(const ModelSpec& spec, bool periodic, Rng& rng) {
    std::optional<Model> m;
    switch (spec.kind) {
        case ModelKind::CellMlp: m.emplace(Model::cell_mlp(spec.grid, spec.mlp, rng)); break;
        case ModelKind::PlainMlp: m.emplace(Model::plain_mlp(rng, spec.mlp)); break;
        case ModelKind::SingleGrid: m.emplace(Model::single_grid(spec.single_grid_resolution, rng)); break;
    }
    if (periodic) m->enable_periodic_sharing();
    return std::move(*m);
}

std::vector<double> TrialSummary::nrmse_values() const {
    std::vector<double> out;
    for (const auto& t : trials) {
        if (!t.failed) out.push_back(t.history.final.nrmse);
    }
    return out;
}

std::vector<std::uint64_t> trial_seeds(std::uint64_t seed, int count) {
    if (count < 1) throw ContractViolation("trials must be >= 1");
    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < count; ++k) seeds.push_back(seed + static_cast<std::uint64_t>(k));
    return seeds;
}

TrialResult run_trial(const ModelSpec& spec, const ProblemSpec& problem,
                      const TrainingConfig& config, const ReferenceSet& refs, std::uint64_t seed) {
    TrainingConfig cfg = config;
    cfg.seed = seed;
    Rng rng(seed);
    Model model = build_model(spec, cfg.scheme == Scheme::Periodic, rng);
    TrialResult r;
    r.seed = seed;
    r.history = train(model, problem, cfg, refs, rng);
    r.failed = r.history.failed;
    r.error = r.history.failure;
    r.model.emplace(std::move(model));
    return r;
}

TrialSummary run_trials(const ModelSpec& spec, const ProblemSpec& problem,
                        const TrainingConfig& config, const ReferenceSet& refs,
                        const std::vector<std::uint64_t>& seeds, int jobs,
                        const std::function<void(std::size_t, const TrialResult&)>& on_done) {
    if (seeds.empty()) throw ContractViolation("run_trials: need at least one seed");
    TrialSummary summary;
    summary.trials.resize(seeds.size());
    std::mutex mu;
    std::exception_ptr error;
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= seeds.size()) return;
            try {
                TrialResult r = run_trial(spec, problem, config, refs, seeds[k]);
                std::lock_guard<std::mutex> lock(mu);
                if (on_done) on_done(k, r);
                summary.trials[k] = std::move(r);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!error) error = std::current_exception();
                next = seeds.size();
                return;
            }
        }
    };

    const int workers = std::clamp(jobs, 1, static_cast<int>(seeds.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);

    const auto values = summary.nrmse_values();
    summary.failures = static_cast<int>(seeds.size() - values.size());
    if (values.empty()) {
        summary.min = summary.mean = summary.max = std::numeric_limits<double>::quiet_NaN();
    } else {
        summary.min = *std::min_element(values.begin(), values.end());
        summary.max = *std::max_element(values.begin(), values.end());
        double s = 0.0;
        for (double v : values) s += v;
        summary.mean = s / static_cast<double>(values.size());
    }
    return summary;
}

}  // namespace cellpinn
