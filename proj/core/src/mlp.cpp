#include "cellpinn/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cellpinn/error.hpp"

namespace cellpinn {

namespace {

struct ActivationDerivs {
    double value;
    double d1;
    double d2;
};

inline ActivationDerivs activate(Activation act, double z) {
    if (act == Activation::Sin) {
        const double s = std::sin(z);
        return {s, std::cos(z), -s};
    }
    const double t = std::tanh(z);
    const double d1 = 1.0 - t * t;
    return {t, d1, -2.0 * t * d1};
}

double normalize_in_place(std::vector<double>& v) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    const double n = std::sqrt(n2);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
    return n;
}

}  // namespace

std::string to_string(Activation activation) {
    return activation == Activation::Sin ? "sin" : "tanh";
}

Activation parse_activation(const std::string& name) {
    if (name == "sin") return Activation::Sin;
    if (name == "tanh") return Activation::Tanh;
    throw ContractViolation("unknown activation '" + name + "' (expected sin|tanh)");
}

void MlpConfig::validate() const {
    if (hidden_layers < 0) throw ContractViolation("mlp: hidden_layers must be >= 0");
    if (width < 1) throw ContractViolation("mlp: width must be >= 1");
}

double spectral_norm(std::span<const double> a, int rows, int cols, PowerIteration& state,
                     int iterations) {
    if (iterations < 1) throw ContractViolation("spectral_norm: iterations must be >= 1");
    if (a.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        throw ContractViolation("spectral_norm: matrix size mismatch");
    }
    const auto R = static_cast<std::size_t>(rows);
    const auto C = static_cast<std::size_t>(cols);
    if (state.u.size() != R || state.v.size() != C) {
        Rng rng(0x5eedULL + R * 131 + C);
        std::normal_distribution<double> normal;
        state.u.assign(R, 0.0);
        state.v.assign(C, 0.0);
        for (double& x : state.u) x = normal(rng);
        normalize_in_place(state.u);
    }

    std::vector<double> tu(C);
    std::vector<double> tv(R);
    for (int it = 0; it < iterations; ++it) {
        std::fill(tu.begin(), tu.end(), 0.0);
        for (std::size_t r = 0; r < R; ++r) {
            const double ur = state.u[r];
            const double* row = a.data() + r * C;
            for (std::size_t c = 0; c < C; ++c) tu[c] += row[c] * ur;
        }
        if (normalize_in_place(tu) == 0.0) {
            state.sigma = 0.0;
            return 0.0;
        }
        state.v = tu;
        for (std::size_t r = 0; r < R; ++r) {
            const double* row = a.data() + r * C;
            tv[r] = std::inner_product(row, row + C, state.v.begin(), 0.0);
        }
        if (normalize_in_place(tv) == 0.0) {
            state.sigma = 0.0;
            return 0.0;
        }
        state.u = tv;
    }
    double sigma = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        const double* row = a.data() + r * C;
        sigma += state.u[r] * std::inner_product(row, row + C, state.v.begin(), 0.0);
    }
    state.sigma = sigma;
    return sigma;
}

Mlp::Mlp(int input_dim, MlpConfig config) : config_(config) {
    config_.validate();
    if (input_dim < 1) throw ContractViolation("mlp: input_dim must be >= 1");
    dims_.push_back(input_dim);
    for (int n = 0; n < config_.hidden_layers; ++n) dims_.push_back(config_.width);
    dims_.push_back(1);
    std::size_t offset = 0;
    for (std::size_t n = 0; n + 1 < dims_.size(); ++n) {
        offsets_.push_back(offset);
        offset += static_cast<std::size_t>(dims_[n] * dims_[n + 1] + dims_[n + 1]);
    }
    offsets_.push_back(offset);
}

void Mlp::initialize(std::span<double> params, Rng& rng) const {
    if (params.size() != parameter_count()) throw ContractViolation("mlp: parameter size mismatch");
    for (int n = 0; n < layer_count(); ++n) {
        const double limit = std::sqrt(6.0 / (in_dim(n) + out_dim(n)));
        std::uniform_real_distribution<double> dist(-limit, limit);
        const std::size_t w0 = weight_offset(n);
        const std::size_t b0 = bias_offset(n);
        for (std::size_t k = w0; k < b0; ++k) params[k] = dist(rng);
        for (int o = 0; o < out_dim(n); ++o) params[b0 + static_cast<std::size_t>(o)] = 0.0;
    }
}

double Mlp::forward(std::span<const double> params, std::span<const double> scales,
                    std::span<const double> h) const {
    MlpPass pass(*this, 0);
    return pass.forward(params, scales, h);
}

std::vector<double> Mlp::output_feature_gradient(std::span<const double> params,
                                                 std::span<const double> scales,
                                                 std::span<const double> h) const {
    MlpPass pass(*this, 0);
    pass.forward(params, scales, h);
    pass.backward(params, scales, 1.0, {0.0, 0.0}, {}, true);
    const auto adj = pass.input_adjoint();
    return {adj.begin(), adj.end()};
}

std::vector<double> Mlp::normalize_weights(std::span<const double> params,
                                           std::span<const double> scales) const {
    std::vector<double> out(params.begin(), params.end());
    for (int n = 0; n < layer_count(); ++n) {
        const double s = scales[static_cast<std::size_t>(n)];
        for (std::size_t k = weight_offset(n); k < bias_offset(n); ++k) out[k] *= s;
    }
    return out;
}

SpectralState SpectralState::for_mlp(const Mlp& mlp) {
    SpectralState state;
    state.layers.resize(static_cast<std::size_t>(mlp.layer_count()));
    state.scales = mlp.unit_scales();
    return state;
}

void SpectralState::refresh(const Mlp& mlp, std::span<const double> params, int iterations) {
    for (int n = 0; n < mlp.layer_count(); ++n) {
        if (!mlp.normalizes_layer(n)) continue;
        const auto w = params.subspan(mlp.weight_offset(n),
                                      static_cast<std::size_t>(mlp.in_dim(n) * mlp.out_dim(n)));
        const double sigma = spectral_norm(w, mlp.out_dim(n), mlp.in_dim(n),
                                           layers[static_cast<std::size_t>(n)], iterations);
        scales[static_cast<std::size_t>(n)] = sigma > 0.0 ? 1.0 / sigma : 1.0;
    }
}

MlpPass::MlpPass(const Mlp& mlp, int tangents) : mlp_(&mlp), tangents_(tangents) {
    if (tangents < 0 || tangents > 2) throw ContractViolation("MlpPass: tangents must be 0..2");
    const int K = mlp.layer_count();
    act_.resize(static_cast<std::size_t>(K));
    dact_.resize(static_cast<std::size_t>(K));
    pre_.resize(static_cast<std::size_t>(K));
    dpre_.resize(static_cast<std::size_t>(K));
    std::size_t widest = 1;
    for (int n = 0; n < K; ++n) {
        const auto in = static_cast<std::size_t>(mlp.in_dim(n));
        const auto out = static_cast<std::size_t>(mlp.out_dim(n));
        widest = std::max({widest, in, out});
        act_[static_cast<std::size_t>(n)].assign(in, 0.0);
        pre_[static_cast<std::size_t>(n)].assign(out, 0.0);
        for (int j = 0; j < tangents; ++j) {
            dact_[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)].assign(in, 0.0);
            dpre_[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)].assign(out, 0.0);
        }
    }
    zbar_.assign(widest, 0.0);
    abar_.assign(widest, 0.0);
    next_abar_.assign(widest, 0.0);
    for (int j = 0; j < 2; ++j) {
        dzbar_[static_cast<std::size_t>(j)].assign(widest, 0.0);
        dabar_[static_cast<std::size_t>(j)].assign(widest, 0.0);
        next_dabar_[static_cast<std::size_t>(j)].assign(widest, 0.0);
    }
}

double MlpPass::forward(std::span<const double> params, std::span<const double> scales,
                        std::span<const double> h) {
    const Mlp& mlp = *mlp_;
    const int K = mlp.layer_count();
    if (h.size() != static_cast<std::size_t>(mlp.input_dim())) {
        throw ContractViolation("mlp: input dimension mismatch");
    }
    std::copy(h.begin(), h.end(), act_[0].begin());
    const Activation act = mlp.config().activation;
    double u = 0.0;
    for (int n = 0; n < K; ++n) {
        const auto nn = static_cast<std::size_t>(n);
        const int in = mlp.in_dim(n);
        const int out = mlp.out_dim(n);
        const double s = scales[nn];
        const double* A = params.data() + mlp.weight_offset(n);
        const double* b = params.data() + mlp.bias_offset(n);
        const double* x = act_[nn].data();
        for (int o = 0; o < out; ++o) {
            const double* row = A + static_cast<std::ptrdiff_t>(o) * in;
            double z = 0.0;
            for (int i = 0; i < in; ++i) z += row[i] * x[i];
            pre_[nn][static_cast<std::size_t>(o)] = s * z + b[o];
            for (int j = 0; j < tangents_; ++j) {
                const double* t = dact_[nn][static_cast<std::size_t>(j)].data();
                double dz = 0.0;
                for (int i = 0; i < in; ++i) dz += row[i] * t[i];
                dpre_[nn][static_cast<std::size_t>(j)][static_cast<std::size_t>(o)] = s * dz;
            }
        }
        if (n + 1 < K) {
            auto& next = act_[nn + 1];
            for (int o = 0; o < out; ++o) {
                const auto oo = static_cast<std::size_t>(o);
                const ActivationDerivs d = activate(act, pre_[nn][oo]);
                next[oo] = d.value;
                for (int j = 0; j < tangents_; ++j) {
                    const auto jj = static_cast<std::size_t>(j);
                    dact_[nn + 1][jj][oo] = d.d1 * dpre_[nn][jj][oo];
                }
            }
        } else {
            u = pre_[nn][0];
            for (int j = 0; j < tangents_; ++j) {
                out_tangent_[static_cast<std::size_t>(j)] = dpre_[nn][static_cast<std::size_t>(j)][0];
            }
        }
    }
    return u;
}

void MlpPass::backward(std::span<const double> params, std::span<const double> scales,
                       double u_bar, const std::array<double, 2>& tangent_bar,
                       std::span<double> grad, bool want_input_adjoint) {
    const Mlp& mlp = *mlp_;
    const int K = mlp.layer_count();
    const Activation act = mlp.config().activation;
    const int T = tangents_;

    // Adjoints of the output layer's pre-activation.
    zbar_[0] = u_bar;
    for (int j = 0; j < T; ++j) dzbar_[static_cast<std::size_t>(j)][0] = tangent_bar[static_cast<std::size_t>(j)];

    for (int n = K - 1; n >= 0; --n) {
        const auto nn = static_cast<std::size_t>(n);
        const int in = mlp.in_dim(n);
        const int out = mlp.out_dim(n);
        const double s = scales[nn];

        if (n < K - 1) {
            // abar_/dabar_ hold adjoints of this layer's activation output.
            for (int o = 0; o < out; ++o) {
                const auto oo = static_cast<std::size_t>(o);
                const ActivationDerivs d = activate(act, pre_[nn][oo]);
                double zb = d.d1 * abar_[oo];
                for (int j = 0; j < T; ++j) {
                    const auto jj = static_cast<std::size_t>(j);
                    zb += d.d2 * dpre_[nn][jj][oo] * dabar_[jj][oo];
                    dzbar_[jj][oo] = d.d1 * dabar_[jj][oo];
                }
                zbar_[oo] = zb;
            }
        }

        const double* A = params.data() + mlp.weight_offset(n);
        const double* x = act_[nn].data();
        if (!grad.empty()) {
            double* gA = grad.data() + mlp.weight_offset(n);
            double* gb = grad.data() + mlp.bias_offset(n);
            for (int o = 0; o < out; ++o) {
                const auto oo = static_cast<std::size_t>(o);
                double* grow = gA + static_cast<std::ptrdiff_t>(o) * in;
                const double zb = s * zbar_[oo];
                for (int i = 0; i < in; ++i) grow[i] += zb * x[i];
                for (int j = 0; j < T; ++j) {
                    const auto jj = static_cast<std::size_t>(j);
                    const double dzb = s * dzbar_[jj][oo];
                    const double* t = dact_[nn][jj].data();
                    for (int i = 0; i < in; ++i) grow[i] += dzb * t[i];
                }
                gb[o] += zbar_[oo];
            }
        }

        if (n == 0 && !want_input_adjoint) break;
        std::fill(next_abar_.begin(), next_abar_.begin() + in, 0.0);
        for (int j = 0; j < T; ++j) {
            auto& nd = next_dabar_[static_cast<std::size_t>(j)];
            std::fill(nd.begin(), nd.begin() + in, 0.0);
        }
        for (int o = 0; o < out; ++o) {
            const auto oo = static_cast<std::size_t>(o);
            const double* row = A + static_cast<std::ptrdiff_t>(o) * in;
            const double zb = s * zbar_[oo];
            for (int i = 0; i < in; ++i) next_abar_[static_cast<std::size_t>(i)] += row[i] * zb;
            for (int j = 0; j < T; ++j) {
                const auto jj = static_cast<std::size_t>(j);
                const double dzb = s * dzbar_[jj][oo];
                double* nd = next_dabar_[jj].data();
                for (int i = 0; i < in; ++i) nd[i] += row[i] * dzb;
            }
        }
        std::swap(abar_, next_abar_);
        for (int j = 0; j < T; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            std::swap(dabar_[jj], next_dabar_[jj]);
        }
    }
}

}  // namespace cellpinn
