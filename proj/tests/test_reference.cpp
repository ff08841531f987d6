#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <cellpinn/error.hpp>
#include <cellpinn/reference.hpp>

#include "support.hpp"

using namespace cellpinn;

namespace {

double max_error_vs_analytic(const ProblemSpec& p, int cells) {
    const ReferenceField fd = fd_solve(p, cells);
    const ReferenceField ex = analytic_field(p, cells + 1);
    double e = 0.0;
    for (std::size_t k = 0; k < fd.values.size(); ++k)
        e = std::max(e, std::abs(fd.values[k] - ex.values[k]));
    return e;
}

double field_nrmse(const ReferenceField& ref, const ReferenceField& other) {
    return nrmse(ref.values, other.values);
}

Model constant_model(double c, Rng& rng) {
    Model m = Model::single_grid(4, rng);
    auto p = m.parameters();
    std::fill(p.begin(), p.end(), c);
    return m;
}

}  // namespace

TEST(GridPoints, StorageOrderAndExactEnds) {
    const auto pts = grid_points(3);
    ASSERT_EQ(pts.size(), 9u);
    EXPECT_EQ(pts[1].x, 0.0);
    EXPECT_EQ(pts[1].y, 0.5);
    EXPECT_EQ(pts[6].x, 1.0);
    EXPECT_EQ(pts[8].y, 1.0);
    EXPECT_EQ(grid_points(101)[100 * 101 + 100].x, 1.0);
    EXPECT_THROW(grid_points(1), ContractViolation);
}

TEST(AnalyticField, Values) {
    const auto f = analytic_field(make_exp1(), 3);
    EXPECT_EQ(f.source, ReferenceSource::Analytic);
    EXPECT_EQ(f.at(0, 2), 1.0);
    EXPECT_NEAR(f.at(2, 2), 2.0 * std::exp(-1.0), 1e-15);
    EXPECT_THROW(analytic_field(make_exp2(), 3), UnsupportedError);
}

TEST(FdSolve, ZeroDataGivesZeroField) {
    ProblemSpec p = make_exp4();
    p.source = [](const Point&) { return 0.0; };
    const auto f = fd_solve(p, 20);
    for (double v : f.values) EXPECT_EQ(v, 0.0);
}

TEST(FdSolve, ReproducesDiscreteHarmonicData) {
    // A bilinear function is harmonic and reproduced exactly by the 5-point stencil.
    ProblemSpec p = make_exp1();
    p.source = [](const Point&) { return 0.0; };
    p.boundary_value = [](const Point& q) { return 1.0 + 2.0 * q.x - q.y + 3.0 * q.x * q.y; };
    const auto f = fd_solve(p, 16);
    const auto pts = grid_points(17);
    for (std::size_t k = 0; k < pts.size(); ++k)
        EXPECT_NEAR(f.values[k], p.boundary_value(pts[k]), 1e-9);
}

TEST(FdSolve, Exp1AccurateAtDefaultResolution) {
    const auto p = make_exp1();
    FdStats st;
    const auto fd = fd_solve(p, 500, 1e-10, &st);
    EXPECT_EQ(fd.source, ReferenceSource::FiniteDifference);
    EXPECT_EQ(fd.points_per_side, 501);
    EXPECT_LE(st.relative_residual, 1e-10);
    EXPECT_LE(field_nrmse(analytic_field(p, 501), fd), 1e-4);
}

TEST(FdSolve, SecondOrderConvergence) {
    for (const auto& p : {make_exp1(), make_exp4()}) {
        const double e1 = max_error_vs_analytic(p, 60);
        const double e2 = max_error_vs_analytic(p, 120);
        EXPECT_GE(e1 / e2, 3.0) << p.name;
        EXPECT_LE(e1 / e2, 5.0) << p.name;
    }
}

TEST(FdSolve, VariableCoefficientConvergesAtSecondOrder) {
    // Self-convergence against a fine solve on a shared 41-node grid.
    for (const auto& p : {make_exp2(0.5), make_exp3()}) {
        const auto fine = subsample(fd_solve(p, 640), 41);
        const double e1 = field_nrmse(fine, subsample(fd_solve(p, 80), 41));
        const double e2 = field_nrmse(fine, subsample(fd_solve(p, 160), 41));
        EXPECT_GE(e1 / e2, 3.0) << p.name;
        EXPECT_LE(e1 / e2, 5.0) << p.name;
    }
}

TEST(FdSolve, OracleResolutionIsConverged) {
    for (const auto& p : {make_exp2(), make_exp3()}) {
        const auto coarse = fd_solve(p, 500);
        const auto fine = subsample(fd_solve(p, 1000), 501);
        const double d_fine = field_nrmse(fine, coarse);
        EXPECT_LE(d_fine, 5e-5) << p.name;
        // Richardson check: the 250 -> 500 change is about four times the 500 -> 1000 one.
        const double d_coarse = field_nrmse(subsample(coarse, 251), fd_solve(p, 250));
        EXPECT_GE(d_coarse / d_fine, 3.0) << p.name;
        EXPECT_LE(d_coarse / d_fine, 5.0) << p.name;
    }
}

TEST(FdSolve, PeriodicSolutionIsGaugedAndPeriodic) {
    const auto f = fd_solve(make_exp3(), 64);
    EXPECT_EQ(f.at(0, 0), 0.0);
    for (int j = 0; j < 65; ++j) {
        EXPECT_EQ(f.at(0, j), f.at(64, j));
        EXPECT_EQ(f.at(j, 0), f.at(j, 64));
    }
}

TEST(FdSolve, NonConvergenceThrowsOracleError) {
    // A tolerance below round-off cannot be met within the iteration cap.
    EXPECT_THROW(fd_solve(make_exp1(), 8, 1e-300), OracleError);
    EXPECT_THROW(fd_solve(make_exp1(), 1), ContractViolation);
}

TEST(Subsample, NestedOnly) {
    const auto f = analytic_field(make_exp1(), 9);
    const auto s = subsample(f, 5);
    EXPECT_EQ(s.at(1, 3), f.at(2, 6));
    EXPECT_THROW(subsample(f, 4), ContractViolation);
}

TEST(Nrmse, ExactCases) {
    const std::vector<double> y = {1.0, 2.0, 0.0, -1.0};
    EXPECT_EQ(nrmse(y, y), 0.0);
    const std::vector<double> z(4, 0.0);
    EXPECT_DOUBLE_EQ(nrmse(y, z), 1.0);
    const std::vector<double> a = {1.0, 2.0}, b = {1.0, 1.0}, c = {1.0, 3.0};
    EXPECT_DOUBLE_EQ(nrmse(a, b), std::sqrt(0.2));
    EXPECT_DOUBLE_EQ(nrmse(a, c), std::sqrt(0.2));
}

TEST(Nrmse, ScaleEquivariance) {
    Rng rng(1);
    std::vector<double> y(50), m(50);
    testing_support::randomize(y, rng, 1.0);
    testing_support::randomize(m, rng, 1.0);
    std::vector<double> ys(50), ms(50);
    for (int k = 0; k < 50; ++k) {
        ys[k] = 7.5 * y[k];
        ms[k] = 7.5 * m[k];
    }
    EXPECT_NEAR(nrmse(ys, ms), nrmse(y, m), 1e-14);
}

TEST(Nrmse, Errors) {
    const std::vector<double> z(3, 0.0), one(3, 1.0), two(2, 1.0);
    EXPECT_THROW(nrmse(z, one), MetricError);
    EXPECT_THROW(nrmse(one, two), ContractViolation);
}

TEST(ModelOnGrid, GaugeFixSubtractsOrigin) {
    Rng rng(2);
    Model m = constant_model(0.75, rng);
    for (double v : evaluate_model_on_grid(m, 5, false)) EXPECT_DOUBLE_EQ(v, 0.75);
    for (double v : evaluate_model_on_grid(m, 5, true)) EXPECT_EQ(v, 0.0);
}

TEST(ReferenceSet, ConstantShiftInvisibleUnderGauge) {
    Rng rng(3);
    const auto oracle = fd_solve(make_exp3(), 100);
    const auto refs = make_reference_set(make_exp3(), 11, 101, &oracle);
    EXPECT_TRUE(refs.gauge_fix);
    Model m0 = constant_model(0.0, rng);
    Model m1 = constant_model(5.0, rng);
    EXPECT_DOUBLE_EQ(refs.evaluate_final(m0).nrmse, refs.evaluate_final(m1).nrmse);
    EXPECT_DOUBLE_EQ(refs.evaluate_final(m0).nrmse, 1.0);
    EXPECT_EQ(refs.evaluate_trace(m0).points_per_side, 11);
}

TEST(ReferenceSet, AnalyticAndOracleSources) {
    const auto r1 = make_reference_set(make_exp1(), 11, 21);
    EXPECT_EQ(r1.final.source, ReferenceSource::Analytic);
    EXPECT_FALSE(r1.gauge_fix);
    EXPECT_THROW(make_reference_set(make_exp2(), 11, 21), UnsupportedError);
    const auto oracle = fd_solve(make_exp2(), 20);
    EXPECT_THROW(make_reference_set(make_exp2(), 11, 8, &oracle), ContractViolation);
}
