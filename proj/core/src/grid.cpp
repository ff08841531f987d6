#include "cellpinn/grid.hpp"

#include <algorithm>
#include <string>

namespace cellpinn {

void GridConfig::validate() const {
    if (levels < 1) throw ContractViolation("grid: levels must be >= 1");
    if (max_resolution < 1) throw ContractViolation("grid: max_resolution must be >= 1");
    if (features < 1) throw ContractViolation("grid: features must be >= 1");
    if (levels > 1 && !(growth > 1.0)) throw ContractViolation("grid: growth must be > 1");
}

int resolution_from_base(double base_resolution, double growth, int level) {
    const double r = std::floor(std::pow(growth, level) * base_resolution);
    return std::max(1, static_cast<int>(r));
}

int level_resolution(const GridConfig& config, int level) {
    if (level < 0 || level >= config.levels) {
        throw ContractViolation("grid: level " + std::to_string(level) + " out of range [0, " +
                                std::to_string(config.levels) + ")");
    }
    // The finest level is pinned so that rounding in base * growth^(L-1) cannot
    // drop it one below the configured maximum.
    if (level == config.levels - 1) return config.max_resolution;
    const double base = config.max_resolution / std::pow(config.growth, config.levels - 1);
    return resolution_from_base(base, config.growth, level);
}

std::vector<NodeTag> classify_level(int resolution) {
    const int r = resolution;
    std::vector<NodeTag> tags(static_cast<std::size_t>(r + 1) * static_cast<std::size_t>(r + 1),
                              NodeTag::Interior);
    for (int c1 = 0; c1 <= r; ++c1) {
        for (int c2 = 0; c2 <= r; ++c2) {
            const bool on1 = c1 == 0 || c1 == r;
            const bool on2 = c2 == 0 || c2 == r;
            NodeTag tag = NodeTag::Interior;
            if (on1 && on2) {
                tag = NodeTag::Corner;
            } else if (on1) {
                tag = c1 == 0 ? NodeTag::Left : NodeTag::Right;
            } else if (on2) {
                tag = c2 == 0 ? NodeTag::Bottom : NodeTag::Top;
            }
            tags[static_cast<std::size_t>(node_index(c1, c2, r))] = tag;
        }
    }
    return tags;
}

std::size_t SharingMap::canonical_count(std::size_t level) const {
    const auto& map = canonical.at(level);
    std::size_t count = 0;
    for (std::size_t n = 0; n < map.size(); ++n) {
        if (map[n] == static_cast<std::int64_t>(n)) ++count;
    }
    return count;
}

MultiresGrid::MultiresGrid(GridConfig config) : config_(config) {
    config_.validate();
    resolutions_.reserve(static_cast<std::size_t>(config_.levels));
    offsets_.reserve(static_cast<std::size_t>(config_.levels) + 1);
    std::size_t offset = 0;
    for (int l = 0; l < config_.levels; ++l) {
        const int r = level_resolution(config_, l);
        resolutions_.push_back(r);
        offsets_.push_back(offset);
        offset += static_cast<std::size_t>(r + 1) * static_cast<std::size_t>(r + 1) *
                  static_cast<std::size_t>(config_.features);
    }
    offsets_.push_back(offset);
}

std::size_t MultiresGrid::node_count(int level) const {
    const auto r = static_cast<std::size_t>(resolution(level));
    return (r + 1) * (r + 1);
}

void MultiresGrid::initialize(std::span<double> params, Rng& rng, double scale) const {
    if (params.size() != parameter_count()) throw ContractViolation("grid: parameter size mismatch");
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (double& p : params) p = dist(rng);
}

double MultiresGrid::interpolate(std::span<const double> params, const CellLocation& loc,
                                 int feature) const {
    const int r = resolution(loc.level);
    const auto nodes = cell_nodes(loc, r);
    const double p00 = params[parameter_index(loc.level, nodes[0], feature)];
    const double p01 = params[parameter_index(loc.level, nodes[1], feature)];
    const double p10 = params[parameter_index(loc.level, nodes[2], feature)];
    const double p11 = params[parameter_index(loc.level, nodes[3], feature)];
    const double row0 = (1.0 - loc.xi2) * p00 + loc.xi2 * p01;
    const double row1 = (1.0 - loc.xi2) * p10 + loc.xi2 * p11;
    return (1.0 - loc.xi1) * row0 + loc.xi1 * row1;
}

void MultiresGrid::encode(std::span<const double> params, const Point& x,
                          std::span<double> h) const {
    if (h.size() != static_cast<std::size_t>(feature_dim())) {
        throw ContractViolation("grid: feature vector size mismatch");
    }
    const int F = config_.features;
    for (int l = 0; l < config_.levels; ++l) {
        const CellLocation loc = locate(x, resolutions_[static_cast<std::size_t>(l)], l);
        for (int f = 0; f < F; ++f) {
            h[static_cast<std::size_t>(l * F + f)] = interpolate(params, loc, f);
        }
    }
}

std::vector<double> MultiresGrid::encode(std::span<const double> params, const Point& x) const {
    std::vector<double> h(static_cast<std::size_t>(feature_dim()));
    encode(params, x, h);
    return h;
}

void MultiresGrid::feature_spatial_gradient(std::span<const double> params, const Point& x,
                                            std::span<double> dhdx) const {
    if (dhdx.size() != 2 * static_cast<std::size_t>(feature_dim())) {
        throw ContractViolation("grid: spatial gradient size mismatch");
    }
    const int F = config_.features;
    for (int l = 0; l < config_.levels; ++l) {
        const int r = resolutions_[static_cast<std::size_t>(l)];
        const CellLocation loc = locate(x, r, l);
        const auto nodes = cell_nodes(loc, r);
        for (int f = 0; f < F; ++f) {
            const double p00 = params[parameter_index(l, nodes[0], f)];
            const double p01 = params[parameter_index(l, nodes[1], f)];
            const double p10 = params[parameter_index(l, nodes[2], f)];
            const double p11 = params[parameter_index(l, nodes[3], f)];
            const double d1 = (1.0 - loc.xi2) * (p10 - p00) + loc.xi2 * (p11 - p01);
            const double d2 = (1.0 - loc.xi1) * (p01 - p00) + loc.xi1 * (p11 - p10);
            const auto i = static_cast<std::size_t>(l * F + f);
            dhdx[2 * i] = r * d1;
            dhdx[2 * i + 1] = r * d2;
        }
    }
}

std::vector<double> MultiresGrid::feature_spatial_gradient(std::span<const double> params,
                                                           const Point& x) const {
    std::vector<double> dhdx(2 * static_cast<std::size_t>(feature_dim()));
    feature_spatial_gradient(params, x, dhdx);
    return dhdx;
}

std::vector<std::vector<NodeTag>> MultiresGrid::classify_nodes() const {
    std::vector<std::vector<NodeTag>> tags;
    tags.reserve(resolutions_.size());
    for (int r : resolutions_) tags.push_back(classify_level(r));
    return tags;
}

SharingMap MultiresGrid::build_periodic_sharing() const {
    SharingMap map;
    map.canonical.reserve(resolutions_.size());
    for (int r : resolutions_) {
        std::vector<std::int64_t> canon(static_cast<std::size_t>(r + 1) * static_cast<std::size_t>(r + 1));
        for (int c1 = 0; c1 <= r; ++c1) {
            for (int c2 = 0; c2 <= r; ++c2) {
                canon[static_cast<std::size_t>(node_index(c1, c2, r))] =
                    node_index(c1 % r, c2 % r, r);
            }
        }
        map.canonical.push_back(std::move(canon));
    }
    return map;
}

}  // namespace cellpinn
