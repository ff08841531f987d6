#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <cellpinn/error.hpp>
#include <cellpinn/problems.hpp>

#include "support.hpp"

using namespace cellpinn;
using testing_support::random_points;

namespace {
constexpr double kPi = std::numbers::pi;

Model zero_model(Rng& rng) {
    Model m = Model::cell_mlp(GridConfig{2, 4, 1.5, 2}, MlpConfig{}, rng);
    auto p = m.parameters();
    std::fill(p.begin(), p.end(), 0.0);
    return m;
}
}  // namespace

TEST(Exp1, ClosedFormValues) {
    const auto p = make_exp1();
    EXPECT_EQ((*p.analytic)({0.0, 0.0}), 0.0);
    EXPECT_EQ((*p.analytic)({0.0, 1.0}), 1.0);
    EXPECT_NEAR((*p.analytic)({1.0, 1.0}), 2.0 * std::exp(-1.0), 1e-15);
    EXPECT_NEAR((*p.analytic)({1.0, 1.0}), 0.735759, 1e-6);
    EXPECT_EQ(p.boundary_value({0.0, 1.0}), 1.0);
}

TEST(Exp2, CoefficientAndSource) {
    const auto p = make_exp2();
    EXPECT_EQ(p.epsilon, 0.125);
    EXPECT_EQ(p.coefficient({0.0, 0.0}), 2.0);
    EXPECT_NEAR(p.coefficient({0.125 / 4, 0.0}), 3.0, 1e-15);
    EXPECT_NEAR(make_exp2(0.5).coefficient({0.5 / 4, 0.0}), 3.0, 1e-15);
    EXPECT_EQ(p.source({0.0, 0.0}), 1.0);
    EXPECT_EQ(p.boundary_value({0.3, 1.0}), 0.0);
    EXPECT_FALSE(p.has_analytic());
    EXPECT_THROW(make_exp2(0.0), ContractViolation);
}

TEST(Exp3, SourceAndCoefficient) {
    const auto p = make_exp3();
    EXPECT_TRUE(p.is_periodic());
    EXPECT_NEAR(p.source({0.0, 0.0}), 2 * kPi, 1e-15);
    Rng rng(1);
    for (const Point& x : random_points(1000, rng)) {
        EXPECT_GE(p.coefficient(x), 1.0);
        EXPECT_LE(p.coefficient(x), 3.0);
    }
    EXPECT_THROW(p.dirichlet_loss(), UnsupportedError);
}

TEST(Exp3, SourceHasZeroMean) {
    const auto p = make_exp3();
    Rng rng(2);
    const std::size_t n = 1'000'000;
    double s = 0.0, s2 = 0.0;
    for (const Point& x : sample_interior(n, rng)) {
        const double f = p.source(x);
        s += f;
        s2 += f * f;
    }
    const double mean = s / n;
    const double sd = std::sqrt(s2 / n - mean * mean);
    EXPECT_LE(std::abs(mean), 3.0 * sd / std::sqrt(static_cast<double>(n)));
}

TEST(Exp4, ClosedFormValues) {
    const auto p = make_exp4();
    const auto& u = *p.analytic;
    EXPECT_NEAR(u({0.0, 0.3}), 0.0, 1e-18);
    EXPECT_NEAR(u({0.25, 0.25}), 1.0 / (72 * kPi * kPi), 1e-17);
    EXPECT_NEAR(u({0.25, 0.25}), 1.40724e-3, 1e-8);
    EXPECT_NEAR(u({1.0 / 6.0, 0.7}), 0.0, 1e-17);
}

TEST(Registry, NamesAndErrors) {
    for (const auto& name : problem_names()) EXPECT_EQ(make_problem(name).name, name);
    EXPECT_THROW(make_problem("exp5"), ContractViolation);
}

TEST(Lagrangian, PartialsMatchFiniteDifferences) {
    Rng rng(3);
    std::uniform_real_distribution<double> v(-2.0, 2.0);
    for (const auto& p : {make_exp1(), make_exp2(), make_exp3(), make_exp4()}) {
        for (const Point& x : random_points(100, rng)) {
            const double u = v(rng);
            const Vec2 g{v(rng), v(rng)};
            const auto t = p.lagrangian(x, u, g);
            const double h = 1e-5;
            const double du = (p.lagrangian(x, u + h, g).value - p.lagrangian(x, u - h, g).value) / (2 * h);
            const double d0 = (p.lagrangian(x, u, {g[0] + h, g[1]}).value -
                               p.lagrangian(x, u, {g[0] - h, g[1]}).value) / (2 * h);
            const double d1 = (p.lagrangian(x, u, {g[0], g[1] + h}).value -
                               p.lagrangian(x, u, {g[0], g[1] - h}).value) / (2 * h);
            EXPECT_NEAR(t.d_u, du, 1e-8);
            EXPECT_NEAR(t.d_grad[0], d0, 1e-8);
            EXPECT_NEAR(t.d_grad[1], d1, 1e-8);
        }
    }
}

TEST(Lagrangian, SignConventions) {
    const Point x{0.3, 0.4};
    const auto e1 = make_exp1();
    EXPECT_DOUBLE_EQ(e1.lagrangian(x, 2.0, {0.0, 0.0}).value, e1.source(x) * 2.0);
    const auto e2 = make_exp2();
    EXPECT_DOUBLE_EQ(e2.lagrangian(x, 2.0, {0.0, 0.0}).value, -e2.source(x) * 2.0);
    EXPECT_DOUBLE_EQ(e2.lagrangian(x, 0.0, {1.0, 2.0}).value, 0.5 * e2.coefficient(x) * 5.0);
}

TEST(ClosedForms, LaplacianEqualsSource) {
    Rng rng(4);
    const double h = 1e-4;
    for (const auto& p : {make_exp1(), make_exp4()}) {
        const auto& u = *p.analytic;
        for (const Point& x : random_points(100, rng, 0.01)) {
            const double lap = (u({x.x + h, x.y}) + u({x.x - h, x.y}) + u({x.x, x.y + h}) +
                                u({x.x, x.y - h}) - 4 * u(x)) / (h * h);
            EXPECT_NEAR(lap, p.source(x), 1e-4) << p.name;
        }
    }
}

TEST(EnergyEstimate, ZeroModelOnExp4IsZero) {
    Rng rng(5);
    Model m = zero_model(rng);
    EXPECT_EQ(energy_estimate(m, make_exp4(), sample_interior(1000, rng)), 0.0);
}

TEST(EnergyEstimate, MatchesPointwiseLagrangianMean) {
    Rng rng(6);
    Model m = Model::cell_mlp(GridConfig{3, 8, 1.4, 2}, MlpConfig{}, rng);
    testing_support::randomize(m.parameters().first(m.grid_parameter_count()), rng, 0.3);
    const auto p = make_exp2();
    const auto pts = sample_interior(500, rng);
    double s = 0.0;
    for (const Point& x : pts) {
        const auto ev = m.evaluate_with_gradient(x);
        s += p.lagrangian(x, ev.u, ev.grad_u).value;
    }
    EXPECT_NEAR(energy_estimate(m, p, pts), s / 500.0, 1e-14);
}

TEST(EnergyEstimate, ExactSolutionEnergyOfExp4) {
    // Quadrature oracle: midpoint rule on a fine grid, then the closed form it confirms.
    const auto p = make_exp4();
    const double k = 6 * kPi;
    auto density = [&](const Point& x) {
        const double sx = std::sin(k * x.x), cx = std::cos(k * x.x);
        const double sy = std::sin(k * x.y), cy = std::cos(k * x.y);
        const double c = 1.0 / (2 * k * k);
        const Vec2 g{c * k * cx * sy, c * k * sx * cy};
        return p.lagrangian(x, (*p.analytic)(x), g).value;
    };
    const int n = 1200;
    double quad = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) quad += density({(i + 0.5) / n, (j + 0.5) / n});
    quad /= static_cast<double>(n) * n;
    const double closed = -1.0 / (16.0 * 36.0 * kPi * kPi);
    EXPECT_NEAR(quad, closed, 1e-12);

    Rng rng(7);
    const std::size_t N = 1'000'000;
    double s = 0.0, s2 = 0.0;
    for (const Point& x : sample_interior(N, rng)) {
        const double d = density(x);
        s += d;
        s2 += d * d;
    }
    const double mean = s / N;
    const double se = std::sqrt((s2 / N - mean * mean) / N);
    EXPECT_LE(std::abs(mean - closed), 3 * se);
}

TEST(DirichletLoss, ZeroWhenModelMatchesData) {
    Rng rng(8);
    Model m = zero_model(rng);
    EXPECT_EQ(dirichlet_loss(m, make_exp4(), sample_boundary(100, rng)), 0.0);
}

TEST(DirichletLoss, ZeroModelOnExp1IsMeanSquaredData) {
    Rng rng(9);
    Model m = zero_model(rng);
    const auto p = make_exp1();
    const auto pts = sample_boundary(10, rng);
    double s = 0.0;
    for (const Point& x : pts) s += p.boundary_value(x) * p.boundary_value(x);
    const double loss = dirichlet_loss(m, p, pts);
    EXPECT_GT(loss, 0.0);
    EXPECT_DOUBLE_EQ(loss, s / 10.0);
}

TEST(DirichletLoss, MatchesDirectRecomputation) {
    Rng rng(10);
    Model m = Model::cell_mlp(GridConfig{2, 5, 1.5, 2}, MlpConfig{}, rng);
    testing_support::randomize(m.parameters(), rng, 0.5);
    const auto p = make_exp1();
    const auto pts = sample_boundary(10, rng);
    double s = 0.0;
    for (const Point& x : pts) s += std::pow(m.evaluate(x) - p.boundary_value(x), 2);
    EXPECT_NEAR(dirichlet_loss(m, p, pts), s / 10.0, 1e-15);
}

TEST(Samplers, StratifiedBoundaryHitsEachEdge) {
    Rng rng(11);
    const auto pts = sample_boundary(4, rng, true);
    EXPECT_EQ(pts[0].x, 0.0);
    EXPECT_EQ(pts[1].x, 1.0);
    EXPECT_EQ(pts[2].y, 0.0);
    EXPECT_EQ(pts[3].y, 1.0);
}

TEST(Samplers, BoundaryPointsLieOnEdgesUniformly) {
    Rng rng(12);
    const auto pts = sample_boundary(40000, rng);
    int counts[4] = {0, 0, 0, 0};
    for (const Point& p : pts) {
        const bool on = p.x == 0.0 || p.x == 1.0 || p.y == 0.0 || p.y == 1.0;
        ASSERT_TRUE(on);
        counts[p.x == 0.0 ? 0 : p.x == 1.0 ? 1 : p.y == 0.0 ? 2 : 3]++;
    }
    for (int c : counts) EXPECT_NEAR(c / 40000.0, 0.25, 0.01);
}

TEST(Samplers, InteriorMeanAndStrictness) {
    Rng rng(13);
    const auto pts = sample_interior(1'000'000, rng);
    double s = 0.0;
    for (const Point& p : pts) {
        ASSERT_GT(p.x, 0.0);
        ASSERT_LT(p.x, 1.0);
        ASSERT_GT(p.y, 0.0);
        ASSERT_LT(p.y, 1.0);
        s += p.x;
    }
    EXPECT_NEAR(s / 1e6, 0.5, 0.002);
    EXPECT_THROW(sample_interior(0, rng), ContractViolation);
    EXPECT_THROW(sample_boundary(0, rng), ContractViolation);
}
