#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cellpinn/error.hpp"
#include "cellpinn/types.hpp"

namespace cellpinn {

/// Layout of a multilevel multiresolution grid on the unit square.
///
/// The finest level always has exactly `max_resolution` cells per side; coarser
/// levels shrink geometrically by `growth`.
struct GridConfig {
    int levels = 16;
    int max_resolution = 87;
    double growth = 1.12;
    int features = 2;

    void validate() const;
    int feature_dim() const noexcept { return levels * features; }

    friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

/// floor(growth^level * base_resolution), never below 1.
int resolution_from_base(double base_resolution, double growth, int level);

/// Cells per side of `level`. Uses base = max_resolution / growth^(levels-1) and
/// returns max_resolution exactly for the finest level.
int level_resolution(const GridConfig& config, int level);

/// Cell index and local coordinates of a point on one level.
struct CellLocation {
    int level = 0;
    int c1 = 0;
    int c2 = 0;
    double xi1 = 0.0;
    double xi2 = 0.0;
};

namespace detail {
inline void locate_axis(double coord, int resolution, int& cell, double& xi) {
    const double scaled = coord * resolution;
    int c = static_cast<int>(std::floor(scaled));
    if (c > resolution - 1) c = resolution - 1;
    if (c < 0) c = 0;
    cell = c;
    xi = scaled - c;
}
}  // namespace detail

/// Cell containing `x` on a level with `resolution` cells per side. A coordinate
/// equal to 1 lands in the last cell with local coordinate 1.
inline CellLocation locate(const Point& x, int resolution, int level = 0) {
    if (!(x.x >= 0.0 && x.x <= 1.0 && x.y >= 0.0 && x.y <= 1.0)) {
        throw DomainError("point outside the closed unit square");
    }
    CellLocation loc;
    loc.level = level;
    detail::locate_axis(x.x, resolution, loc.c1, loc.xi1);
    detail::locate_axis(x.y, resolution, loc.c2, loc.xi2);
    return loc;
}

/// Row-major node index on a level: n = c1 * (r + 1) + c2.
inline std::int64_t node_index(int c1, int c2, int resolution) noexcept {
    return static_cast<std::int64_t>(c1) * (resolution + 1) + c2;
}

/// The four nodes of a cell, always in the order
/// (c1,c2), (c1,c2+1), (c1+1,c2), (c1+1,c2+1), with one weight per node.
struct CellStencil {
    std::array<std::int64_t, 4> nodes{};
    std::array<double, 4> weights{};
};

/// d^2 h / (dp dx): per node, the derivative of its interpolation weight with
/// respect to x1 and x2 (already scaled by the level resolution).
struct MixedStencil {
    std::array<std::int64_t, 4> nodes{};
    std::array<double, 4> d_x1{};
    std::array<double, 4> d_x2{};
};

inline std::array<std::int64_t, 4> cell_nodes(const CellLocation& loc, int resolution) noexcept {
    const std::int64_t n00 = node_index(loc.c1, loc.c2, resolution);
    const std::int64_t stride = resolution + 1;
    return {n00, n00 + 1, n00 + stride, n00 + stride + 1};
}

/// Bilinear basis values at `loc`; they sum to one.
inline CellStencil feature_param_gradient(const CellLocation& loc, int resolution) noexcept {
    const double a1 = 1.0 - loc.xi1;
    const double a2 = 1.0 - loc.xi2;
    return {cell_nodes(loc, resolution),
            {a1 * a2, a1 * loc.xi2, loc.xi1 * a2, loc.xi1 * loc.xi2}};
}

inline MixedStencil feature_mixed_gradient(const CellLocation& loc, int resolution) noexcept {
    const double r = resolution;
    const double a1 = 1.0 - loc.xi1;
    const double a2 = 1.0 - loc.xi2;
    return {cell_nodes(loc, resolution),
            {-r * a2, -r * loc.xi2, r * a2, r * loc.xi2},
            {-r * a1, r * a1, -r * loc.xi1, r * loc.xi1}};
}

enum class NodeTag : std::uint8_t { Interior, Left, Right, Bottom, Top, Corner };

inline bool is_boundary(NodeTag tag) noexcept { return tag != NodeTag::Interior; }

/// Tags for every node of a level with `resolution` cells per side. Left/right
/// are c1 = 0 / c1 = r, bottom/top are c2 = 0 / c2 = r.
std::vector<NodeTag> classify_level(int resolution);

/// Per level, the canonical node each node's parameters are stored in. Identity
/// map when no sharing is active.
struct SharingMap {
    std::vector<std::vector<std::int64_t>> canonical;

    std::size_t canonical_count(std::size_t level) const;
};

/// Multiresolution grid geometry plus the mapping from (level, node, feature) to
/// a flat parameter array. The grid owns no parameter values; every operation
/// takes a view of them.
class MultiresGrid {
public:
    explicit MultiresGrid(GridConfig config);

    const GridConfig& config() const noexcept { return config_; }
    int levels() const noexcept { return config_.levels; }
    int features() const noexcept { return config_.features; }
    int feature_dim() const noexcept { return config_.feature_dim(); }
    int resolution(int level) const { return resolutions_.at(static_cast<std::size_t>(level)); }
    const std::vector<int>& resolutions() const noexcept { return resolutions_; }

    std::size_t node_count(int level) const;
    std::size_t level_offset(int level) const { return offsets_.at(static_cast<std::size_t>(level)); }
    std::size_t parameter_count() const noexcept { return offsets_.back(); }
    std::size_t parameter_index(int level, std::int64_t node, int feature) const noexcept {
        return offsets_[static_cast<std::size_t>(level)] +
               static_cast<std::size_t>(node) * static_cast<std::size_t>(config_.features) +
               static_cast<std::size_t>(feature);
    }

    /// Uniform random values in [-scale, scale].
    void initialize(std::span<double> params, Rng& rng, double scale = 1e-4) const;

    /// [1-xi1, xi1] P [1-xi2, xi2]^T for feature `feature` of the cell at `loc`.
    double interpolate(std::span<const double> params, const CellLocation& loc, int feature) const;

    /// Feature vector h(x), ordered i = level * F + feature.
    void encode(std::span<const double> params, const Point& x, std::span<double> h) const;
    std::vector<double> encode(std::span<const double> params, const Point& x) const;

    /// dh/dx as a row-major (L*F) x 2 matrix. Points on an internal cell edge get
    /// the value from the cell `locate` assigns them to.
    void feature_spatial_gradient(std::span<const double> params, const Point& x,
                                  std::span<double> dhdx) const;
    std::vector<double> feature_spatial_gradient(std::span<const double> params,
                                                 const Point& x) const;

    std::vector<std::vector<NodeTag>> classify_nodes() const;

    /// Aliases node (r, j) to (0, j) and (i, r) to (i, 0) on every level, so
    /// each level keeps r^2 canonical nodes.
    SharingMap build_periodic_sharing() const;

private:
    GridConfig config_;
    std::vector<int> resolutions_;
    std::vector<std::size_t> offsets_;  // levels + 1 entries
};

}  // namespace cellpinn
