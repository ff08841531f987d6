#include "cellpinn/reference.hpp"

#include <cmath>
#include <string>

#include "cellpinn/error.hpp"

namespace cellpinn {

namespace {

void require_points(int n, const char* who) {
    if (n < 2) throw ContractViolation(std::string(who) + ": need at least 2 points per side");
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// Five-point operator with face coefficients. Dirichlet: unknowns are the
// (n-1)^2 interior nodes. Periodic: n^2 nodes with wrap-around.
struct FluxOperator {
    int n = 0;
    bool periodic = false;
    int m = 0;               // unknowns per side
    std::vector<double> ax;  // face between (i,j) and (i+1,j)
    std::vector<double> ay;  // face between (i,j) and (i,j+1)
    std::vector<double> diag;

    // Unknown (p, q) corresponds to node (p + off, q + off).
    int off() const { return periodic ? 0 : 1; }
    std::size_t fx(int i, int j) const { return static_cast<std::size_t>(i) * (n + 1) + j; }
    std::size_t fy(int i, int j) const { return static_cast<std::size_t>(i) * (n + 1) + j; }

    FluxOperator(const ScalarField& a, int cells, bool wrap) : n(cells), periodic(wrap) {
        m = periodic ? n : n - 1;
        const double h = 1.0 / n;
        ax.assign(static_cast<std::size_t>(n + 1) * (n + 1), 0.0);
        ay.assign(ax.size(), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= n; ++j) ax[fx(i, j)] = a({(i + 0.5) * h, j * h});
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j < n; ++j) ay[fy(i, j)] = a({i * h, (j + 0.5) * h});
        diag.resize(static_cast<std::size_t>(m) * m);
        for (int p = 0; p < m; ++p) {
            for (int q = 0; q < m; ++q) {
                const int i = p + off(), j = q + off();
                const int iw = periodic ? (i + n - 1) % n : i - 1;
                const int js = periodic ? (j + n - 1) % n : j - 1;
                diag[idx(p, q)] = ax[fx(i, j)] + ax[fx(iw, j)] + ay[fy(i, j)] + ay[fy(i, js)];
            }
        }
    }

    std::size_t idx(int p, int q) const { return static_cast<std::size_t>(p) * m + q; }

    void apply(const std::vector<double>& u, std::vector<double>& out) const {
        for (int p = 0; p < m; ++p) {
            for (int q = 0; q < m; ++q) {
                const int i = p + off(), j = q + off();
                double s = diag[idx(p, q)] * u[idx(p, q)];
                if (periodic) {
                    const int pe = (p + 1) % n, pw = (p + n - 1) % n;
                    const int qn = (q + 1) % n, qs = (q + n - 1) % n;
                    s -= ax[fx(i, j)] * u[idx(pe, q)];
                    s -= ax[fx(pw, j)] * u[idx(pw, q)];
                    s -= ay[fy(i, j)] * u[idx(p, qn)];
                    s -= ay[fy(i, qs)] * u[idx(p, qs)];
                } else {
                    if (p + 1 < m) s -= ax[fx(i, j)] * u[idx(p + 1, q)];
                    if (p > 0) s -= ax[fx(i - 1, j)] * u[idx(p - 1, q)];
                    if (q + 1 < m) s -= ay[fy(i, j)] * u[idx(p, q + 1)];
                    if (q > 0) s -= ay[fy(i, j - 1)] * u[idx(p, q - 1)];
                }
                out[idx(p, q)] = s;
            }
        }
    }
};

}  // namespace

std::vector<Point> grid_points(int points_per_side) {
    require_points(points_per_side, "grid_points");
    const int n = points_per_side;
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(n) * n);
    const double step = 1.0 / (n - 1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            // Exact endpoints; i * step can round just below 1.
            const double x = (i == n - 1) ? 1.0 : i * step;
            const double y = (j == n - 1) ? 1.0 : j * step;
            pts.push_back({x, y});
        }
    }
    return pts;
}

ReferenceField analytic_field(const ProblemSpec& problem, int points_per_side) {
    if (!problem.has_analytic()) throw UnsupportedError(problem.name + " has no closed-form solution");
    ReferenceField f;
    f.points_per_side = points_per_side;
    f.source = ReferenceSource::Analytic;
    const auto pts = grid_points(points_per_side);
    f.values.reserve(pts.size());
    for (const Point& p : pts) f.values.push_back((*problem.analytic)(p));
    return f;
}

ReferenceField fd_solve(const ProblemSpec& problem, int cells, double tolerance, FdStats* stats) {
    if (cells < 2) throw ContractViolation("fd_solve: cells must be >= 2");
    if (!(tolerance > 0.0)) throw ContractViolation("fd_solve: tolerance must be > 0");
    const bool periodic = problem.is_periodic();
    if (!periodic && !problem.boundary_value) {
        throw UnsupportedError(problem.name + ": fd_solve needs Dirichlet data");
    }
    const int n = cells;
    const double h = 1.0 / n;
    const FluxOperator op(problem.coefficient, n, periodic);
    const int m = op.m;
    const std::size_t size = static_cast<std::size_t>(m) * m;

    auto node_point = [h, n](int i, int j) {
        return Point{i == n ? 1.0 : i * h, j == n ? 1.0 : j * h};
    };

    std::vector<double> b(size);
    for (int p = 0; p < m; ++p) {
        for (int q = 0; q < m; ++q) {
            const int i = p + op.off(), j = q + op.off();
            double r = -problem.source_sign * problem.source(node_point(i, j)) * h * h;
            if (!periodic) {
                if (i == 1) r += op.ax[op.fx(0, j)] * problem.boundary_value(node_point(0, j));
                if (i == n - 1) r += op.ax[op.fx(n - 1, j)] * problem.boundary_value(node_point(n, j));
                if (j == 1) r += op.ay[op.fy(i, 0)] * problem.boundary_value(node_point(i, 0));
                if (j == n - 1) r += op.ay[op.fy(i, n - 1)] * problem.boundary_value(node_point(i, n));
            }
            b[op.idx(p, q)] = r;
        }
    }
    if (periodic) {
        double mean = 0.0;
        for (double v : b) mean += v;
        mean /= static_cast<double>(size);
        for (double& v : b) v -= mean;
    }

    std::vector<double> x(size, 0.0), r = b, z(size), p(size), ap(size);
    const double bnorm = std::sqrt(dot(b, b));
    const long long max_iter = 10LL * n * n;
    int iter = 0;
    double rel = 0.0;
    if (bnorm > 0.0) {
        for (std::size_t k = 0; k < size; ++k) z[k] = r[k] / op.diag[k];
        p = z;
        double rz = dot(r, z);
        bool converged = false;
        while (iter < max_iter) {
            op.apply(p, ap);
            const double pap = dot(p, ap);
            if (!(pap > 0.0) || !std::isfinite(pap)) break;
            const double alpha = rz / pap;
            for (std::size_t k = 0; k < size; ++k) {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            ++iter;
            rel = std::sqrt(dot(r, r)) / bnorm;
            if (!std::isfinite(rel)) break;
            if (rel <= tolerance) {
                converged = true;
                break;
            }
            for (std::size_t k = 0; k < size; ++k) z[k] = r[k] / op.diag[k];
            const double rz_new = dot(r, z);
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t k = 0; k < size; ++k) p[k] = z[k] + beta * p[k];
        }
        if (!converged) {
            throw OracleError("fd_solve(" + problem.name + ", n=" + std::to_string(n) +
                              "): CG stopped after " + std::to_string(iter) +
                              " iterations at relative residual " + std::to_string(rel));
        }
    }
    if (stats) *stats = {iter, rel};

    ReferenceField f;
    f.points_per_side = n + 1;
    f.source = ReferenceSource::FiniteDifference;
    f.fd_cells = n;
    f.solver_tolerance = tolerance;
    f.values.assign(static_cast<std::size_t>(n + 1) * (n + 1), 0.0);
    auto out = [&](int i, int j) -> double& {
        return f.values[static_cast<std::size_t>(i) * (n + 1) + j];
    };
    if (periodic) {
        const double shift = x[0];
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j) out(i, j) = x[op.idx(i % n, j % n)] - shift;
    } else {
        for (int i = 0; i <= n; ++i) {
            for (int j = 0; j <= n; ++j) {
                const bool edge = i == 0 || j == 0 || i == n || j == n;
                out(i, j) = edge ? problem.boundary_value(node_point(i, j))
                                 : x[op.idx(i - 1, j - 1)];
            }
        }
    }
    return f;
}

ReferenceField subsample(const ReferenceField& field, int points_per_side) {
    require_points(points_per_side, "subsample");
    const int big = field.points_per_side;
    if (points_per_side > big || (big - 1) % (points_per_side - 1) != 0) {
        throw ContractViolation("subsample: " + std::to_string(points_per_side) +
                                " points do not nest in a " + std::to_string(big) + "-point grid");
    }
    const int stride = (big - 1) / (points_per_side - 1);
    ReferenceField out = field;
    out.points_per_side = points_per_side;
    out.values.clear();
    out.values.reserve(static_cast<std::size_t>(points_per_side) * points_per_side);
    for (int i = 0; i < points_per_side; ++i)
        for (int j = 0; j < points_per_side; ++j) out.values.push_back(field.at(i * stride, j * stride));
    return out;
}

double nrmse(std::span<const double> reference, std::span<const double> model) {
    if (reference.size() != model.size()) throw ContractViolation("nrmse: size mismatch");
    if (reference.empty()) throw ContractViolation("nrmse: empty fields");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < reference.size(); ++k) {
        const double d = reference[k] - model[k];
        num += d * d;
        den += reference[k] * reference[k];
    }
    if (den == 0.0) throw MetricError("nrmse: reference field is identically zero");
    return std::sqrt(num / den);
}

std::vector<double> evaluate_model_on_grid(const Model& model, int points_per_side,
                                           bool gauge_fix) {
    const auto pts = grid_points(points_per_side);
    std::vector<double> u(pts.size());
    model.evaluate_batch(pts, u);
    if (gauge_fix) {
        const double u0 = model.evaluate({0.0, 0.0});
        for (double& v : u) v -= u0;
    }
    return u;
}

EvalReport ReferenceSet::evaluate_trace(const Model& model) const {
    const auto u = evaluate_model_on_grid(model, trace.points_per_side, gauge_fix);
    return {nrmse(trace.values, u), trace.points_per_side, gauge_fix};
}

EvalReport ReferenceSet::evaluate_final(const Model& model) const {
    const auto u = evaluate_model_on_grid(model, final.points_per_side, gauge_fix);
    return {nrmse(final.values, u), final.points_per_side, gauge_fix};
}

ReferenceSet make_reference_set(const ProblemSpec& problem, int trace_points, int final_points,
                                const ReferenceField* oracle) {
    ReferenceSet set;
    set.gauge_fix = problem.is_periodic();
    if (problem.has_analytic()) {
        set.trace = analytic_field(problem, trace_points);
        set.final = analytic_field(problem, final_points);
        return set;
    }
    if (!oracle) throw UnsupportedError(problem.name + ": a finite-difference reference is required");
    set.trace = subsample(*oracle, trace_points);
    set.final = subsample(*oracle, final_points);
    return set;
}

}  // namespace cellpinn
