#pragma once

#include <array>
#include <cstdint>
#include <random>

namespace cellpinn {

/// A location in the unit square. `x` is the first coordinate, `y` the second.
struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Spatial gradient (d/dx, d/dy).
using Vec2 = std::array<double, 2>;

using Rng = std::mt19937_64;

}  // namespace cellpinn
