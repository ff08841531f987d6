#include "cellpinn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cellpinn/error.hpp"

#ifdef CELLPINN_HAVE_OPENMP
#include <omp.h>
#endif

namespace cellpinn {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::CellMlp: return "cell-mlp";
        case ModelKind::PlainMlp: return "plain-mlp";
        case ModelKind::SingleGrid: return "single-grid";
    }
    return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
    if (name == "cell-mlp") return ModelKind::CellMlp;
    if (name == "plain-mlp") return ModelKind::PlainMlp;
    if (name == "single-grid") return ModelKind::SingleGrid;
    throw ContractViolation("unknown model kind '" + name +
                            "' (expected cell-mlp|plain-mlp|single-grid)");
}

MlpConfig Model::plain_mlp_config() {
    MlpConfig cfg;
    cfg.hidden_layers = 5;
    cfg.width = 64;
    cfg.activation = Activation::Tanh;
    cfg.spectral_normalization = false;
    return cfg;
}

Model Model::cell_mlp(const GridConfig& grid, const MlpConfig& mlp, Rng& rng) {
    Model m;
    m.kind_ = ModelKind::CellMlp;
    m.grid_.emplace(grid);
    m.mlp_.emplace(m.grid_->feature_dim(), mlp);
    m.params_.assign(m.grid_->parameter_count() + m.mlp_->parameter_count(), 0.0);
    m.grid_->initialize(std::span<double>(m.params_).first(m.grid_->parameter_count()), rng);
    m.mlp_->initialize(std::span<double>(m.params_).subspan(m.grid_->parameter_count()), rng);
    m.spectral_ = SpectralState::for_mlp(*m.mlp_);
    m.refresh_spectral_norm();
    m.rebuild_mask();
    return m;
}

Model Model::plain_mlp(Rng& rng, const MlpConfig& mlp) {
    Model m;
    m.kind_ = ModelKind::PlainMlp;
    m.mlp_.emplace(2, mlp);
    m.params_.assign(m.mlp_->parameter_count(), 0.0);
    m.mlp_->initialize(m.params_, rng);
    m.spectral_ = SpectralState::for_mlp(*m.mlp_);
    m.refresh_spectral_norm();
    m.rebuild_mask();
    return m;
}

Model Model::single_grid(int resolution, Rng& rng) {
    Model m;
    m.kind_ = ModelKind::SingleGrid;
    m.grid_.emplace(GridConfig{1, resolution, 2.0, 1});
    m.params_.assign(m.grid_->parameter_count(), 0.0);
    m.grid_->initialize(m.params_, rng);
    m.rebuild_mask();
    return m;
}

void Model::set_trainable(bool grid_boundary, bool grid_interior, bool mlp) {
    boundary_trainable_ = grid_boundary;
    interior_trainable_ = grid_interior;
    mlp_trainable_ = mlp && mlp_.has_value();
    rebuild_mask();
}

void Model::rebuild_mask() {
    const std::size_t G = grid_parameter_count();
    if (grid_ && boundary_entry_.size() != G) {
        boundary_entry_.assign(G, 0);
        const auto tags = grid_->classify_nodes();
        for (int l = 0; l < grid_->levels(); ++l) {
            const auto& lt = tags[static_cast<std::size_t>(l)];
            for (std::size_t n = 0; n < lt.size(); ++n) {
                if (!is_boundary(lt[n])) continue;
                for (int f = 0; f < grid_->features(); ++f) {
                    boundary_entry_[grid_->parameter_index(l, static_cast<std::int64_t>(n), f)] = 1;
                }
            }
        }
    }
    trainable_.assign(params_.size(), 0);
    for (std::size_t k = 0; k < G; ++k) {
        trainable_[k] = boundary_entry_[k] ? boundary_trainable_ : interior_trainable_;
    }
    if (sharing_) {
        for (int l = 0; l < grid_->levels(); ++l) {
            const auto& canon = sharing_->canonical[static_cast<std::size_t>(l)];
            for (std::size_t n = 0; n < canon.size(); ++n) {
                if (canon[n] == static_cast<std::int64_t>(n)) continue;
                for (int f = 0; f < grid_->features(); ++f) {
                    trainable_[grid_->parameter_index(l, static_cast<std::int64_t>(n), f)] = 0;
                }
            }
        }
    }
    for (std::size_t k = G; k < params_.size(); ++k) trainable_[k] = mlp_trainable_ ? 1 : 0;
}

std::vector<std::size_t> Model::boundary_parameter_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < boundary_entry_.size(); ++k) {
        if (boundary_entry_[k]) out.push_back(k);
    }
    return out;
}

void Model::enable_periodic_sharing() {
    if (!grid_) throw UnsupportedError("periodic sharing requires a grid model");
    sharing_ = grid_->build_periodic_sharing();
    synchronize_aliases();
    rebuild_mask();
}

void Model::fold_shared_gradients(std::span<double> grad) const {
    if (!sharing_) return;
    for (int l = 0; l < grid_->levels(); ++l) {
        const auto& canon = sharing_->canonical[static_cast<std::size_t>(l)];
        for (std::size_t n = 0; n < canon.size(); ++n) {
            const std::int64_t c = canon[n];
            if (c == static_cast<std::int64_t>(n)) continue;
            for (int f = 0; f < grid_->features(); ++f) {
                const std::size_t from = grid_->parameter_index(l, static_cast<std::int64_t>(n), f);
                grad[grid_->parameter_index(l, c, f)] += grad[from];
                grad[from] = 0.0;
            }
        }
    }
}

void Model::synchronize_aliases() {
    if (!sharing_) return;
    for (int l = 0; l < grid_->levels(); ++l) {
        const auto& canon = sharing_->canonical[static_cast<std::size_t>(l)];
        for (std::size_t n = 0; n < canon.size(); ++n) {
            const std::int64_t c = canon[n];
            if (c == static_cast<std::int64_t>(n)) continue;
            for (int f = 0; f < grid_->features(); ++f) {
                params_[grid_->parameter_index(l, static_cast<std::int64_t>(n), f)] =
                    params_[grid_->parameter_index(l, c, f)];
            }
        }
    }
}

void Model::set_spectral_state(SpectralState state) {
    if (!mlp_) return;
    if (state.scales.size() != static_cast<std::size_t>(mlp_->layer_count())) {
        throw ContractViolation("spectral state does not match the MLP layer count");
    }
    spectral_ = std::move(state);
}

void Model::refresh_spectral_norm() {
    if (!mlp_ || !mlp_->config().spectral_normalization) return;
    spectral_.refresh(*mlp_, mlp_parameters());
}

void Model::mask_gradient(std::span<double> grad) const {
    for (std::size_t k = 0; k < grad.size(); ++k) {
        if (!trainable_[k]) grad[k] = 0.0;
    }
}

// ---------------------------------------------------------------------------

struct Model::Workspace {
    MlpPass value_pass;
    MlpPass tangent_pass;
    std::vector<double> h;
    std::vector<double> dhdx;  // row-major D x 2
    std::vector<CellLocation> locs;

    Workspace(const Mlp& mlp, std::size_t levels, std::size_t dim)
        : value_pass(mlp, 0), tangent_pass(mlp, 2), h(dim), dhdx(2 * dim), locs(levels) {}
};

namespace {

// Fills h (and dh/dx when `with_gradient`) for every level of the grid.
void encode_point(const MultiresGrid& grid, std::span<const double> params, const Point& x,
                  bool with_gradient, std::vector<double>& h, std::vector<double>& dhdx,
                  std::vector<CellLocation>& locs) {
    const int F = grid.features();
    for (int l = 0; l < grid.levels(); ++l) {
        const int r = grid.resolution(l);
        const CellLocation loc = locate(x, r, l);
        locs[static_cast<std::size_t>(l)] = loc;
        const auto nodes = cell_nodes(loc, r);
        const double a1 = 1.0 - loc.xi1;
        const double a2 = 1.0 - loc.xi2;
        for (int f = 0; f < F; ++f) {
            const double p00 = params[grid.parameter_index(l, nodes[0], f)];
            const double p01 = params[grid.parameter_index(l, nodes[1], f)];
            const double p10 = params[grid.parameter_index(l, nodes[2], f)];
            const double p11 = params[grid.parameter_index(l, nodes[3], f)];
            const auto i = static_cast<std::size_t>(l * F + f);
            const double row0 = a2 * p00 + loc.xi2 * p01;
            const double row1 = a2 * p10 + loc.xi2 * p11;
            h[i] = a1 * row0 + loc.xi1 * row1;
            if (with_gradient) {
                dhdx[2 * i] = r * (row1 - row0);
                dhdx[2 * i + 1] = r * (a1 * (p01 - p00) + loc.xi1 * (p11 - p10));
            }
        }
    }
}

// Routes adjoints of h and dh/dx back onto the grid nodes.
void scatter_grid(const MultiresGrid& grid, const std::vector<CellLocation>& locs,
                  std::span<const double> hbar, std::span<const double> vbar0,
                  std::span<const double> vbar1, std::span<double> grad) {
    const int F = grid.features();
    for (int l = 0; l < grid.levels(); ++l) {
        const int r = grid.resolution(l);
        const CellLocation& loc = locs[static_cast<std::size_t>(l)];
        const CellStencil w = feature_param_gradient(loc, r);
        if (vbar0.empty()) {
            for (int f = 0; f < F; ++f) {
                const double hb = hbar[static_cast<std::size_t>(l * F + f)];
                for (int k = 0; k < 4; ++k) {
                    grad[grid.parameter_index(l, w.nodes[static_cast<std::size_t>(k)], f)] +=
                        hb * w.weights[static_cast<std::size_t>(k)];
                }
            }
            continue;
        }
        const MixedStencil m = feature_mixed_gradient(loc, r);
        for (int f = 0; f < F; ++f) {
            const auto i = static_cast<std::size_t>(l * F + f);
            const double hb = hbar[i];
            const double v0 = vbar0[i];
            const double v1 = vbar1[i];
            for (std::size_t k = 0; k < 4; ++k) {
                grad[grid.parameter_index(l, w.nodes[k], f)] +=
                    hb * w.weights[k] + v0 * m.d_x1[k] + v1 * m.d_x2[k];
            }
        }
    }
}

bool finite_terms(const LagrangianTerms& t) {
    return std::isfinite(t.value) && std::isfinite(t.d_u) && std::isfinite(t.d_grad[0]) &&
           std::isfinite(t.d_grad[1]);
}

}  // namespace

double Model::evaluate(const Point& x) const {
    double u = 0.0;
    evaluate_batch(std::span<const Point>(&x, 1), std::span<double>(&u, 1));
    return u;
}

void Model::evaluate_batch(std::span<const Point> xs, std::span<double> out) const {
    if (out.size() != xs.size()) throw ContractViolation("evaluate_batch: size mismatch");
    switch (kind_) {
        case ModelKind::SingleGrid: {
            for (std::size_t k = 0; k < xs.size(); ++k) {
                out[k] = grid_->interpolate(params_, locate(xs[k], grid_->resolution(0), 0), 0);
            }
            return;
        }
        case ModelKind::PlainMlp: {
            MlpPass pass(*mlp_, 0);
            for (std::size_t k = 0; k < xs.size(); ++k) {
                const double in[2] = {xs[k].x, xs[k].y};
                if (!(in[0] >= 0.0 && in[0] <= 1.0 && in[1] >= 0.0 && in[1] <= 1.0)) {
                    throw DomainError("point outside the closed unit square");
                }
                out[k] = pass.forward(mlp_parameters(), spectral_.scales, in);
            }
            return;
        }
        case ModelKind::CellMlp: {
            Workspace ws(*mlp_, static_cast<std::size_t>(grid_->levels()),
                         static_cast<std::size_t>(grid_->feature_dim()));
            for (std::size_t k = 0; k < xs.size(); ++k) {
                encode_point(*grid_, params_, xs[k], false, ws.h, ws.dhdx, ws.locs);
                out[k] = ws.value_pass.forward(mlp_parameters(), spectral_.scales, ws.h);
            }
            return;
        }
    }
}

ModelEval Model::evaluate_with_gradient(const Point& x) const {
    ModelEval ev;
    evaluate_batch_with_gradient(std::span<const Point>(&x, 1), std::span<ModelEval>(&ev, 1));
    return ev;
}

void Model::evaluate_batch_with_gradient(std::span<const Point> xs,
                                         std::span<ModelEval> out) const {
    if (out.size() != xs.size()) throw ContractViolation("evaluate_batch: size mismatch");
    if (kind_ == ModelKind::SingleGrid) {
        std::vector<double> h(1), dhdx(2);
        std::vector<CellLocation> locs(1);
        for (std::size_t k = 0; k < xs.size(); ++k) {
            encode_point(*grid_, params_, xs[k], true, h, dhdx, locs);
            out[k] = {h[0], {dhdx[0], dhdx[1]}};
        }
        return;
    }
    const std::size_t levels = grid_ ? static_cast<std::size_t>(grid_->levels()) : 0;
    const std::size_t dim = grid_ ? static_cast<std::size_t>(grid_->feature_dim()) : 2;
    Workspace ws(*mlp_, levels, dim);
    MlpPass& pass = ws.tangent_pass;
    auto t0 = pass.input_tangent(0);
    auto t1 = pass.input_tangent(1);
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const Point& x = xs[k];
        if (kind_ == ModelKind::PlainMlp) {
            if (!(x.x >= 0.0 && x.x <= 1.0 && x.y >= 0.0 && x.y <= 1.0)) {
                throw DomainError("point outside the closed unit square");
            }
            ws.h[0] = x.x;
            ws.h[1] = x.y;
            t0[0] = 1.0; t0[1] = 0.0;
            t1[0] = 0.0; t1[1] = 1.0;
        } else {
            encode_point(*grid_, params_, x, true, ws.h, ws.dhdx, ws.locs);
            for (std::size_t i = 0; i < ws.h.size(); ++i) {
                t0[i] = ws.dhdx[2 * i];
                t1[i] = ws.dhdx[2 * i + 1];
            }
        }
        out[k].u = pass.forward(mlp_parameters(), spectral_.scales, ws.h);
        out[k].grad_u = {pass.output_tangent(0), pass.output_tangent(1)};
    }
}

double Model::accumulate_range(std::span<const Point> batch, std::size_t begin, std::size_t end,
                               const PointLoss& loss, double scale, std::span<double> grad,
                               Workspace& ws, std::size_t& bad_index) const {
    const bool with_gradient = loss.uses_gradient;
    const bool grid_grads = grid_ && (boundary_trainable_ || interior_trainable_);
    const std::size_t G = grid_parameter_count();
    std::span<double> mlp_grad =
        (mlp_ && mlp_trainable_) ? grad.subspan(G) : std::span<double>{};
    double sum = 0.0;

    for (std::size_t k = begin; k < end; ++k) {
        const Point& x = batch[k];
        double u = 0.0;
        Vec2 gu{0.0, 0.0};

        if (kind_ == ModelKind::SingleGrid) {
            encode_point(*grid_, params_, x, with_gradient, ws.h, ws.dhdx, ws.locs);
            u = ws.h[0];
            if (with_gradient) gu = {ws.dhdx[0], ws.dhdx[1]};
            const LagrangianTerms t = loss.eval(x, u, gu);
            if (!finite_terms(t)) {
                bad_index = std::min(bad_index, k);
                continue;
            }
            sum += t.value;
            if (grid_grads) {
                const double hb[1] = {scale * t.d_u};
                const double v0[1] = {scale * t.d_grad[0]};
                const double v1[1] = {scale * t.d_grad[1]};
                scatter_grid(*grid_, ws.locs, hb, with_gradient ? std::span<const double>(v0) : std::span<const double>{},
                             v1, grad);
            }
            continue;
        }

        MlpPass& pass = with_gradient ? ws.tangent_pass : ws.value_pass;
        if (kind_ == ModelKind::PlainMlp) {
            if (!(x.x >= 0.0 && x.x <= 1.0 && x.y >= 0.0 && x.y <= 1.0)) {
                throw DomainError("point outside the closed unit square");
            }
            ws.h[0] = x.x;
            ws.h[1] = x.y;
            if (with_gradient) {
                auto t0 = pass.input_tangent(0);
                auto t1 = pass.input_tangent(1);
                t0[0] = 1.0; t0[1] = 0.0;
                t1[0] = 0.0; t1[1] = 1.0;
            }
        } else {
            encode_point(*grid_, params_, x, with_gradient, ws.h, ws.dhdx, ws.locs);
            if (with_gradient) {
                auto t0 = pass.input_tangent(0);
                auto t1 = pass.input_tangent(1);
                for (std::size_t i = 0; i < ws.h.size(); ++i) {
                    t0[i] = ws.dhdx[2 * i];
                    t1[i] = ws.dhdx[2 * i + 1];
                }
            }
        }
        u = pass.forward(mlp_parameters(), spectral_.scales, ws.h);
        if (with_gradient) gu = {pass.output_tangent(0), pass.output_tangent(1)};
        const LagrangianTerms t = loss.eval(x, u, gu);
        if (!finite_terms(t)) {
            bad_index = std::min(bad_index, k);
            continue;
        }
        sum += t.value;
        const bool need_input = grid_grads && kind_ == ModelKind::CellMlp;
        if (mlp_grad.empty() && !need_input) continue;
        pass.backward(mlp_parameters(), spectral_.scales, scale * t.d_u,
                      {scale * t.d_grad[0], scale * t.d_grad[1]}, mlp_grad, need_input);
        if (need_input) {
            scatter_grid(*grid_, ws.locs, pass.input_adjoint(),
                         with_gradient ? pass.input_tangent_adjoint(0) : std::span<const double>{},
                         with_gradient ? pass.input_tangent_adjoint(1) : std::span<const double>{},
                         grad);
        }
    }
    return sum;
}

double Model::accumulate_loss_gradient(std::span<const Point> batch, const PointLoss& loss,
                                       double weight, std::span<double> grad) const {
    if (batch.empty()) throw ContractViolation("loss gradient: empty batch");
    if (grad.size() != params_.size()) throw ContractViolation("loss gradient: size mismatch");
    const double scale = weight / static_cast<double>(batch.size());
    const auto levels = grid_ ? static_cast<std::size_t>(grid_->levels()) : 0;
    const auto dim = kind_ == ModelKind::PlainMlp ? std::size_t{2}
                                                  : static_cast<std::size_t>(grid_->feature_dim());
    // Workspaces need an Mlp; the single-grid model borrows a trivial one.
    static const Mlp trivial(1, MlpConfig{0, 1, Activation::Tanh, false});
    const Mlp& mlp_ref = mlp_ ? *mlp_ : trivial;

    int partitions = 1;
#ifdef CELLPINN_HAVE_OPENMP
    partitions = std::max(1, std::min<int>(omp_get_max_threads(),
                                           static_cast<int>(batch.size())));
#endif
    double total = 0.0;
    std::size_t bad = std::numeric_limits<std::size_t>::max();

    if (partitions == 1) {
        Workspace ws(mlp_ref, levels, dim);
        total = accumulate_range(batch, 0, batch.size(), loss, scale, grad, ws, bad);
    } else {
        // Fixed contiguous partitions, each with a private buffer, reduced in
        // partition order: the result depends only on the partition count.
        std::vector<std::vector<double>> buffers(static_cast<std::size_t>(partitions));
        std::vector<double> sums(static_cast<std::size_t>(partitions), 0.0);
        std::vector<std::size_t> bads(static_cast<std::size_t>(partitions),
                                      std::numeric_limits<std::size_t>::max());
        const std::size_t n = batch.size();
#ifdef CELLPINN_HAVE_OPENMP
#pragma omp parallel for schedule(static, 1)
#endif
        for (int p = 0; p < partitions; ++p) {
            const auto pp = static_cast<std::size_t>(p);
            const std::size_t b = n * pp / static_cast<std::size_t>(partitions);
            const std::size_t e = n * (pp + 1) / static_cast<std::size_t>(partitions);
            buffers[pp].assign(params_.size(), 0.0);
            Workspace ws(mlp_ref, levels, dim);
            sums[pp] = accumulate_range(batch, b, e, loss, scale, buffers[pp], ws, bads[pp]);
        }
        for (std::size_t p = 0; p < buffers.size(); ++p) {
            total += sums[p];
            bad = std::min(bad, bads[p]);
            for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += buffers[p][k];
        }
    }
    if (bad != std::numeric_limits<std::size_t>::max()) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "non-finite loss at batch point " << bad << " (" << batch[bad].x << ", "
            << batch[bad].y << ")";
        throw TrainingError(msg.str());
    }
    fold_shared_gradients(grad);
    mask_gradient(grad);
    return total / static_cast<double>(batch.size());
}

LossGradient loss_parameter_gradients(const Model& model, std::span<const Point> batch,
                                      const PointLoss& loss) {
    LossGradient out;
    out.grad.assign(model.parameter_count(), 0.0);
    out.loss = model.accumulate_loss_gradient(batch, loss, 1.0, out.grad);
    return out;
}

}  // namespace cellpinn
