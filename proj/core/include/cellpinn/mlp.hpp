#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cellpinn/types.hpp"

namespace cellpinn {

enum class Activation { Sin, Tanh };

std::string to_string(Activation activation);
Activation parse_activation(const std::string& name);

struct MlpConfig {
    int hidden_layers = 1;
    int width = 32;
    Activation activation = Activation::Sin;
    bool spectral_normalization = true;

    void validate() const;

    friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

/// Persistent left/right singular vector estimates for one weight matrix.
struct PowerIteration {
    std::vector<double> u;  // rows
    std::vector<double> v;  // cols
    double sigma = 0.0;
};

/// Largest singular value of the row-major `rows x cols` matrix `a`, refined by
/// `iterations` power-method steps starting from the vectors stored in `state`.
/// Empty vectors in `state` are seeded deterministically. Returns 0 for a zero
/// matrix.
double spectral_norm(std::span<const double> a, int rows, int cols, PowerIteration& state,
                     int iterations = 1);

/// Dense feed-forward head. Layer n maps dims[n] -> dims[n+1]; every layer but
/// the last is followed by the activation. Parameters live in a flat array:
/// per layer, the row-major weight matrix followed by the bias vector.
class Mlp {
public:
    Mlp(int input_dim, MlpConfig config);

    const MlpConfig& config() const noexcept { return config_; }
    int input_dim() const noexcept { return dims_.front(); }
    int layer_count() const noexcept { return static_cast<int>(dims_.size()) - 1; }
    int in_dim(int layer) const { return dims_.at(static_cast<std::size_t>(layer)); }
    int out_dim(int layer) const { return dims_.at(static_cast<std::size_t>(layer) + 1); }
    std::size_t weight_offset(int layer) const { return offsets_.at(static_cast<std::size_t>(layer)); }
    std::size_t bias_offset(int layer) const {
        return weight_offset(layer) + static_cast<std::size_t>(in_dim(layer) * out_dim(layer));
    }
    std::size_t parameter_count() const noexcept { return offsets_.back(); }

    /// Whether `layer` is rescaled by its spectral norm. The scalar output layer is
    /// never normalized.
    bool normalizes_layer(int layer) const noexcept {
        return config_.spectral_normalization && layer < layer_count() - 1;
    }

    /// Glorot-uniform weights, zero biases.
    void initialize(std::span<double> params, Rng& rng) const;

    /// Per-layer weight multipliers all equal to one (no normalization).
    std::vector<double> unit_scales() const {
        return std::vector<double>(static_cast<std::size_t>(layer_count()), 1.0);
    }

    double forward(std::span<const double> params, std::span<const double> scales,
                   std::span<const double> h) const;

    /// du/dh by the analytic chain rule.
    std::vector<double> output_feature_gradient(std::span<const double> params,
                                                std::span<const double> scales,
                                                std::span<const double> h) const;

    /// Weights with every normalized layer divided by its sigma; biases copied.
    std::vector<double> normalize_weights(std::span<const double> params,
                                          std::span<const double> scales) const;

private:
    MlpConfig config_;
    std::vector<int> dims_;
    std::vector<std::size_t> offsets_;
};

/// Spectral-normalization state of one Mlp: power-iteration vectors and the
/// current per-layer weight multiplier (1/sigma, or 1 when not normalized).
struct SpectralState {
    std::vector<PowerIteration> layers;
    std::vector<double> scales;

    static SpectralState for_mlp(const Mlp& mlp);
    /// One power iteration per normalized layer; refreshes `scales`.
    void refresh(const Mlp& mlp, std::span<const double> params, int iterations = 1);
};

/// Scratch buffers for one forward/backward pass that also propagates up to two
/// tangent directions through the network. With tangents v_j = dh/dx_j the
/// outputs are u and du/dx_j, and the backward pass gives exact gradients of any
/// function of (u, du/dx) with respect to weights, biases, h and v_j.
class MlpPass {
public:
    MlpPass(const Mlp& mlp, int tangents);

    int tangents() const noexcept { return tangents_; }

    /// Input tangent j (length input_dim), to be filled before forward().
    std::span<double> input_tangent(int j) { return dact_[0][static_cast<std::size_t>(j)]; }

    /// Returns u; du/dx_j available through output_tangent(j).
    double forward(std::span<const double> params, std::span<const double> scales,
                   std::span<const double> h);
    double output_tangent(int j) const noexcept { return out_tangent_[static_cast<std::size_t>(j)]; }

    /// Backpropagates seeds (du_bar, dtangent_bar). Parameter gradients are added
    /// to `grad` when it is non-empty. Input adjoints are written when
    /// `want_input_adjoint` is set and then read via input_adjoint().
    void backward(std::span<const double> params, std::span<const double> scales, double u_bar,
                  const std::array<double, 2>& tangent_bar, std::span<double> grad,
                  bool want_input_adjoint);

    /// d(loss)/dh after backward().
    std::span<const double> input_adjoint() const {
        return {abar_.data(), static_cast<std::size_t>(mlp_->input_dim())};
    }
    /// d(loss)/dv_j after backward().
    std::span<const double> input_tangent_adjoint(int j) const {
        return {dabar_[static_cast<std::size_t>(j)].data(), static_cast<std::size_t>(mlp_->input_dim())};
    }

private:
    const Mlp* mlp_;
    int tangents_;
    std::vector<std::vector<double>> act_;                 // act_[n]: input of layer n
    std::vector<std::array<std::vector<double>, 2>> dact_;  // tangents of act_
    std::vector<std::vector<double>> pre_;                 // pre-activation of layer n
    std::vector<std::array<std::vector<double>, 2>> dpre_;
    std::array<double, 2> out_tangent_{};
    std::vector<double> zbar_, abar_, next_abar_;
    std::array<std::vector<double>, 2> dzbar_, dabar_, next_dabar_;
};

}  // namespace cellpinn
