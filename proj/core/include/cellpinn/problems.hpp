#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cellpinn/model.hpp"
#include "cellpinn/types.hpp"

namespace cellpinn {

using ScalarField = std::function<double(const Point&)>;

enum class BoundaryKind { Dirichlet, Periodic };

/// One benchmark PDE on the unit square in energy form
///   E(u) = integral of  1/2 a |grad u|^2 + source_sign * f u.
/// Its Euler-Lagrange equation is -div(a grad u) = -source_sign * f.
struct ProblemSpec {
    std::string name;
    ScalarField coefficient;  // a(x, y) > 0
    ScalarField source;       // f(x, y)
    double source_sign = 1.0;
    BoundaryKind boundary = BoundaryKind::Dirichlet;
    ScalarField boundary_value;  // g on the boundary; empty for periodic problems
    std::optional<ScalarField> analytic;
    double epsilon = 0.0;  // oscillation length of the coefficient (exp2 only)

    bool has_analytic() const noexcept { return analytic.has_value(); }
    bool is_periodic() const noexcept { return boundary == BoundaryKind::Periodic; }

    /// Energy density L(x, u, grad u) with its partials.
    LagrangianTerms lagrangian(const Point& x, double u, const Vec2& grad) const;
    PointLoss energy_loss() const;
    /// (u - g)^2 on the boundary.
    PointLoss dirichlet_loss() const;
};

/// Poisson with non-constant Dirichlet data; u* = e^-x (x + y^3).
ProblemSpec make_exp1();
/// Oscillatory coefficient a = 2 + sin(2 pi x / eps) cos(2 pi y / eps), zero Dirichlet.
ProblemSpec make_exp2(double epsilon = 1.0 / 8.0);
/// Periodic unit-cell problem; solution fixed by u(0,0) = 0.
ProblemSpec make_exp3();
/// Poisson with high-frequency source; u* = sin(6 pi x) sin(6 pi y) / (2 (6 pi)^2).
ProblemSpec make_exp4();

/// Registry lookup: exp1 | exp2 | exp3 | exp4.
ProblemSpec make_problem(const std::string& name, double epsilon = 1.0 / 8.0);
std::vector<std::string> problem_names();

/// Monte Carlo estimate of E(u) from interior samples (|Omega| = 1).
double energy_estimate(const Model& model, const ProblemSpec& problem,
                       std::span<const Point> interior);

/// Mean of (u(x_b) - g(x_b))^2 over boundary samples.
double dirichlet_loss(const Model& model, const ProblemSpec& problem,
                      std::span<const Point> boundary);

/// i.i.d. uniform points strictly inside the unit square.
std::vector<Point> sample_interior(std::size_t n, Rng& rng);
void sample_interior(std::span<Point> out, Rng& rng);

/// Uniform points on the boundary: each edge with probability 1/4. With
/// `stratified`, point k is placed on edge k mod 4 (left, right, bottom, top).
std::vector<Point> sample_boundary(std::size_t n, Rng& rng, bool stratified = false);
void sample_boundary(std::span<Point> out, Rng& rng, bool stratified = false);

}  // namespace cellpinn
