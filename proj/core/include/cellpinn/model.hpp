#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cellpinn/grid.hpp"
#include "cellpinn/mlp.hpp"
#include "cellpinn/types.hpp"

namespace cellpinn {

enum class ModelKind { CellMlp, PlainMlp, SingleGrid };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct ModelEval {
    double u = 0.0;
    Vec2 grad_u{0.0, 0.0};
};

/// Value of a per-point loss L(x, u, grad u) and its partials.
struct LagrangianTerms {
    double value = 0.0;
    double d_u = 0.0;
    Vec2 d_grad{0.0, 0.0};
};

struct PointLoss {
    std::function<LagrangianTerms(const Point& x, double u, const Vec2& grad_u)> eval;
    /// False when L does not depend on grad u; the pass then skips tangents.
    bool uses_gradient = true;
};

/// Field model u(x). Parameters of every kind live in one flat array: grid
/// nodes first (level by level), then MLP layers. A parallel byte mask marks
/// which entries the optimizer may change.
class Model {
public:
    /// Multiresolution grid feeding an MLP head.
    static Model cell_mlp(const GridConfig& grid, const MlpConfig& mlp, Rng& rng);
    /// Coordinate-input MLP baseline.
    static Model plain_mlp(Rng& rng, const MlpConfig& mlp = plain_mlp_config());
    /// One grid level with one feature; the interpolated value is u.
    static Model single_grid(int resolution, Rng& rng);

    /// Five hidden tanh layers of 64 neurons, no spectral normalization.
    static MlpConfig plain_mlp_config();

    ModelKind kind() const noexcept { return kind_; }
    const MultiresGrid* grid() const noexcept { return grid_ ? &*grid_ : nullptr; }
    const Mlp* mlp() const noexcept { return mlp_ ? &*mlp_ : nullptr; }

    std::size_t parameter_count() const noexcept { return params_.size(); }
    std::size_t grid_parameter_count() const noexcept { return grid_ ? grid_->parameter_count() : 0; }
    std::size_t mlp_parameter_count() const noexcept { return mlp_ ? mlp_->parameter_count() : 0; }
    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> grid_parameters() const noexcept {
        return std::span<const double>(params_).first(grid_parameter_count());
    }
    std::span<const double> mlp_parameters() const noexcept {
        return std::span<const double>(params_).subspan(grid_parameter_count());
    }

    // Trainability ---------------------------------------------------------

    std::span<const std::uint8_t> trainable_mask() const noexcept { return trainable_; }
    bool mlp_trainable() const noexcept { return mlp_trainable_; }
    bool grid_boundary_trainable() const noexcept { return boundary_trainable_; }
    bool grid_interior_trainable() const noexcept { return interior_trainable_; }
    void set_trainable(bool grid_boundary, bool grid_interior, bool mlp);
    /// Grid parameter entries that belong to boundary-tagged nodes on any level.
    std::vector<std::size_t> boundary_parameter_indices() const;

    // Periodic parameter sharing --------------------------------------------

    void enable_periodic_sharing();
    bool has_sharing() const noexcept { return sharing_.has_value(); }
    const std::optional<SharingMap>& sharing() const noexcept { return sharing_; }
    /// Adds every alias slot into its canonical slot and zeroes the alias.
    void fold_shared_gradients(std::span<double> grad) const;
    /// Copies canonical node values onto their aliases.
    void synchronize_aliases();

    // Spectral normalization ------------------------------------------------

    const SpectralState& spectral_state() const noexcept { return spectral_; }
    void set_spectral_state(SpectralState state);
    /// One power iteration per normalized layer. No-op without normalization.
    void refresh_spectral_norm();
    std::span<const double> weight_scales() const noexcept { return spectral_.scales; }

    // Evaluation ------------------------------------------------------------

    double evaluate(const Point& x) const;
    ModelEval evaluate_with_gradient(const Point& x) const;
    void evaluate_batch(std::span<const Point> xs, std::span<double> out) const;
    void evaluate_batch_with_gradient(std::span<const Point> xs, std::span<ModelEval> out) const;

    /// Adds weight * d/dtheta [mean_k L(x_k, u, grad u)] into `grad` and returns
    /// the unweighted mean. Contributions to aliased nodes are routed to their
    /// canonical slots, then frozen entries of `grad` are zeroed.
    double accumulate_loss_gradient(std::span<const Point> batch, const PointLoss& loss,
                                    double weight, std::span<double> grad) const;

    /// Zeroes gradient entries of frozen parameters.
    void mask_gradient(std::span<double> grad) const;

private:
    Model() = default;
    void rebuild_mask();

    struct Workspace;
    double accumulate_range(std::span<const Point> batch, std::size_t begin, std::size_t end,
                            const PointLoss& loss, double scale, std::span<double> grad,
                            Workspace& ws, std::size_t& bad_index) const;

    ModelKind kind_ = ModelKind::CellMlp;
    std::optional<MultiresGrid> grid_;
    std::optional<Mlp> mlp_;
    std::vector<double> params_;
    std::vector<std::uint8_t> trainable_;
    std::vector<std::uint8_t> boundary_entry_;  // per grid parameter entry
    std::optional<SharingMap> sharing_;
    SpectralState spectral_;
    bool boundary_trainable_ = true;
    bool interior_trainable_ = true;
    bool mlp_trainable_ = true;

    friend class ModelSerializer;
};

struct LossGradient {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Mean loss over `batch` and its gradient with respect to every parameter.
LossGradient loss_parameter_gradients(const Model& model, std::span<const Point> batch,
                                      const PointLoss& loss);

}  // namespace cellpinn
