#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <cellpinn/model.hpp>
#include <cellpinn/types.hpp>

namespace testing_support {

using cellpinn::Point;
using cellpinn::Rng;

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// |a - b| relative to max(|b|, floor).
inline double rel_error(double a, double b, double floor = 1e-12) {
    return std::abs(a - b) / std::max(std::abs(b), floor);
}

inline std::vector<Point> random_points(std::size_t n, Rng& rng, double margin = 0.0) {
    std::uniform_real_distribution<double> u(margin, 1.0 - margin);
    std::vector<Point> pts(n);
    for (auto& p : pts) p = {u(rng), u(rng)};
    return pts;
}

inline void randomize(std::span<double> values, Rng& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& v : values) v = u(rng);
}

}  // namespace testing_support
