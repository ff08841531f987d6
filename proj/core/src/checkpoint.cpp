#include "cellpinn/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <type_traits>

#include "cellpinn/error.hpp"

namespace cellpinn {

namespace {

constexpr std::array<char, 8> kMagic{'C', 'P', 'N', 'N', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ConfigError("checkpoint: unexpected end of data");
    return v;
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
    put<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::istream& in) {
    const auto n = get<std::uint64_t>(in);
    if (n > (std::uint64_t{1} << 34)) throw ConfigError("checkpoint: implausible array length");
    std::vector<double> v(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ConfigError("checkpoint: unexpected end of data");
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const auto n = get<std::uint64_t>(in);
    if (n > (std::uint64_t{1} << 30)) throw ConfigError("checkpoint: implausible string length");
    std::string s(static_cast<std::size_t>(n), '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw ConfigError("checkpoint: unexpected end of data");
    return s;
}

}  // namespace

void ModelSerializer::write(std::ostream& out, const Model& m) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(m.kind_));
    put<std::uint8_t>(out, m.grid_ ? 1 : 0);
    if (m.grid_) {
        const GridConfig& g = m.grid_->config();
        put<std::int32_t>(out, g.levels);
        put<std::int32_t>(out, g.max_resolution);
        put<double>(out, g.growth);
        put<std::int32_t>(out, g.features);
    }
    put<std::uint8_t>(out, m.mlp_ ? 1 : 0);
    if (m.mlp_) {
        const MlpConfig& c = m.mlp_->config();
        put<std::int32_t>(out, m.mlp_->input_dim());
        put<std::int32_t>(out, c.hidden_layers);
        put<std::int32_t>(out, c.width);
        put<std::uint8_t>(out, static_cast<std::uint8_t>(c.activation));
        put<std::uint8_t>(out, c.spectral_normalization ? 1 : 0);
    }
    put<std::uint8_t>(out, m.sharing_ ? 1 : 0);
    put<std::uint8_t>(out, m.boundary_trainable_ ? 1 : 0);
    put<std::uint8_t>(out, m.interior_trainable_ ? 1 : 0);
    put<std::uint8_t>(out, m.mlp_trainable_ ? 1 : 0);
    put_doubles(out, m.params_);
    put<std::uint64_t>(out, m.spectral_.layers.size());
    for (const auto& p : m.spectral_.layers) {
        put_doubles(out, p.u);
        put_doubles(out, p.v);
        put<double>(out, p.sigma);
    }
    put_doubles(out, m.spectral_.scales);
}

Model ModelSerializer::read(std::istream& in) {
    Model m;
    const auto kind = get<std::uint8_t>(in);
    if (kind > static_cast<std::uint8_t>(ModelKind::SingleGrid)) throw ConfigError("checkpoint: bad model kind");
    m.kind_ = static_cast<ModelKind>(kind);
    try {
        if (get<std::uint8_t>(in)) {
            GridConfig g;
            g.levels = get<std::int32_t>(in);
            g.max_resolution = get<std::int32_t>(in);
            g.growth = get<double>(in);
            g.features = get<std::int32_t>(in);
            m.grid_.emplace(g);
        }
        if (get<std::uint8_t>(in)) {
            const int input_dim = get<std::int32_t>(in);
            MlpConfig c;
            c.hidden_layers = get<std::int32_t>(in);
            c.width = get<std::int32_t>(in);
            const auto act = get<std::uint8_t>(in);
            if (act > static_cast<std::uint8_t>(Activation::Tanh)) throw ConfigError("checkpoint: bad activation");
            c.activation = static_cast<Activation>(act);
            c.spectral_normalization = get<std::uint8_t>(in) != 0;
            m.mlp_.emplace(input_dim, c);
        }
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("checkpoint: invalid configuration: ") + e.what());
    }
    const bool sharing = get<std::uint8_t>(in) != 0;
    m.boundary_trainable_ = get<std::uint8_t>(in) != 0;
    m.interior_trainable_ = get<std::uint8_t>(in) != 0;
    m.mlp_trainable_ = get<std::uint8_t>(in) != 0;
    m.params_ = get_doubles(in);
    if (m.params_.size() != m.grid_parameter_count() + m.mlp_parameter_count()) {
        throw ConfigError("checkpoint: parameter count does not match the configuration");
    }
    const auto layers = get<std::uint64_t>(in);
    if (layers > 4096) throw ConfigError("checkpoint: implausible layer count");
    for (std::uint64_t k = 0; k < layers; ++k) {
        PowerIteration p;
        p.u = get_doubles(in);
        p.v = get_doubles(in);
        p.sigma = get<double>(in);
        m.spectral_.layers.push_back(std::move(p));
    }
    m.spectral_.scales = get_doubles(in);
    if (m.mlp_ && m.spectral_.scales.size() != static_cast<std::size_t>(m.mlp_->layer_count())) {
        throw ConfigError("checkpoint: spectral state does not match the MLP");
    }
    if (sharing) {
        if (!m.grid_) throw ConfigError("checkpoint: sharing flag on a model without a grid");
        m.sharing_ = m.grid_->build_periodic_sharing();
    }
    m.rebuild_mask();
    return m;
}

void write_checkpoint(std::ostream& out, const Model& model, const AdamState& optimizer,
                      std::int64_t step, const std::string& config) {
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kCheckpointVersion);
    put_string(out, config);
    put<std::int64_t>(out, step);
    ModelSerializer::write(out, model);
    put<std::int64_t>(out, optimizer.step);
    put_doubles(out, optimizer.m);
    put_doubles(out, optimizer.v);
}

Checkpoint read_checkpoint(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw ConfigError("checkpoint: not a checkpoint file");
    const auto version = get<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
    }
    std::string config = get_string(in);
    const auto step = get<std::int64_t>(in);
    Model model = ModelSerializer::read(in);
    AdamState adam;
    adam.step = get<std::int64_t>(in);
    adam.m = get_doubles(in);
    adam.v = get_doubles(in);
    if (adam.m.size() != adam.v.size() || (!adam.m.empty() && adam.m.size() != model.parameter_count())) {
        throw ConfigError("checkpoint: optimizer state does not match the model");
    }
    return Checkpoint{std::move(model), std::move(adam), step, std::move(config)};
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const AdamState& optimizer, std::int64_t step, const std::string& config) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    write_checkpoint(out, model, optimizer, step, config);
    if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

}  // namespace cellpinn
