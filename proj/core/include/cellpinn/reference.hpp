#pragma once

#include <span>
#include <string>
#include <vector>

#include "cellpinn/model.hpp"
#include "cellpinn/problems.hpp"

namespace cellpinn {

enum class ReferenceSource { Analytic, FiniteDifference };

/// Values on the uniform N x N node grid of the unit square, boundaries
/// included. Entry (i, j) sits at (i / (N-1), j / (N-1)) and is stored at
/// index i * N + j (x-major).
struct ReferenceField {
    int points_per_side = 0;
    std::vector<double> values;
    ReferenceSource source = ReferenceSource::Analytic;
    int fd_cells = 0;              // finite-difference cells per side
    double solver_tolerance = 0.0;  // CG relative residual target

    double at(int i, int j) const {
        return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(points_per_side) +
                      static_cast<std::size_t>(j)];
    }
};

/// Node coordinates of the N x N evaluation grid in storage order.
std::vector<Point> grid_points(int points_per_side);

/// The closed-form solution sampled on the N x N grid.
ReferenceField analytic_field(const ProblemSpec& problem, int points_per_side);

struct FdStats {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Second-order 5-point finite-difference solution of the problem's
/// Euler-Lagrange equation on an n x n cell grid, in conservative flux form
/// with the coefficient taken at face midpoints. Dirichlet problems use the
/// boundary data; periodic problems wrap indices and are shifted so that
/// u(0,0) = 0. Solved by Jacobi-preconditioned conjugate gradients.
ReferenceField fd_solve(const ProblemSpec& problem, int cells, double tolerance = 1e-10,
                        FdStats* stats = nullptr);

/// Restriction of a field onto a coarser grid whose nodes are a subset.
ReferenceField subsample(const ReferenceField& field, int points_per_side);

/// sqrt( sum (Y - Ybar)^2 / sum Y^2 ).
double nrmse(std::span<const double> reference, std::span<const double> model);

/// u on the N x N grid; with `gauge_fix` the value at (0,0) is subtracted.
std::vector<double> evaluate_model_on_grid(const Model& model, int points_per_side,
                                           bool gauge_fix);

struct EvalReport {
    double nrmse = 0.0;
    int points_per_side = 0;
    bool gauge_fixed = false;
};

/// Trace and final reference fields used during training.
struct ReferenceSet {
    ReferenceField trace;
    ReferenceField final;
    bool gauge_fix = false;

    EvalReport evaluate_trace(const Model& model) const;
    EvalReport evaluate_final(const Model& model) const;
};

/// Builds trace/final fields. Problems with a closed form use it directly;
/// otherwise `oracle` (an fd_solve result) is subsampled, so both sizes must
/// divide its grid.
ReferenceSet make_reference_set(const ProblemSpec& problem, int trace_points, int final_points,
                                const ReferenceField* oracle = nullptr);

}  // namespace cellpinn
