#include "cellpinn/problems.hpp"

#include <cmath>
#include <numbers>

#include "cellpinn/error.hpp"

namespace cellpinn {

namespace {
constexpr double kPi = std::numbers::pi;

double one(const Point&) { return 1.0; }
double zero(const Point&) { return 0.0; }
}  // namespace

LagrangianTerms ProblemSpec::lagrangian(const Point& x, double u, const Vec2& grad) const {
    const double a = coefficient(x);
    const double f = source(x);
    LagrangianTerms t;
    t.value = 0.5 * a * (grad[0] * grad[0] + grad[1] * grad[1]) + source_sign * f * u;
    t.d_u = source_sign * f;
    t.d_grad = {a * grad[0], a * grad[1]};
    return t;
}

PointLoss ProblemSpec::energy_loss() const {
    return {[this](const Point& x, double u, const Vec2& g) { return lagrangian(x, u, g); }, true};
}

PointLoss ProblemSpec::dirichlet_loss() const {
    if (!boundary_value) throw UnsupportedError(name + " has no Dirichlet data");
    return {[this](const Point& x, double u, const Vec2&) {
                const double r = u - boundary_value(x);
                return LagrangianTerms{r * r, 2.0 * r, {0.0, 0.0}};
            },
            false};
}

ProblemSpec make_exp1() {
    ProblemSpec p;
    p.name = "exp1";
    p.coefficient = one;
    p.source = [](const Point& q) {
        return std::exp(-q.x) * (q.x - 2.0 + q.y * q.y * q.y + 6.0 * q.y);
    };
    p.source_sign = 1.0;
    const ScalarField exact = [](const Point& q) { return std::exp(-q.x) * (q.x + q.y * q.y * q.y); };
    p.analytic = exact;
    p.boundary_value = exact;
    return p;
}

ProblemSpec make_exp2(double epsilon) {
    if (!(epsilon > 0.0)) throw ContractViolation("exp2: epsilon must be > 0");
    ProblemSpec p;
    p.name = "exp2";
    p.epsilon = epsilon;
    p.coefficient = [epsilon](const Point& q) {
        return 2.0 + std::sin(2.0 * kPi * q.x / epsilon) * std::cos(2.0 * kPi * q.y / epsilon);
    };
    p.source = [](const Point& q) { return std::sin(q.x) + std::cos(q.y); };
    p.source_sign = -1.0;
    p.boundary_value = zero;
    return p;
}

ProblemSpec make_exp3() {
    ProblemSpec p;
    p.name = "exp3";
    p.coefficient = [](const Point& q) {
        return 2.0 + std::sin(2.0 * kPi * q.x) * std::cos(2.0 * kPi * q.y);
    };
    p.source = [](const Point& q) {
        return 2.0 * kPi * std::cos(2.0 * kPi * q.x) * std::cos(2.0 * kPi * q.y);
    };
    p.source_sign = -1.0;
    p.boundary = BoundaryKind::Periodic;
    return p;
}

ProblemSpec make_exp4() {
    ProblemSpec p;
    p.name = "exp4";
    p.coefficient = one;
    p.source = [](const Point& q) { return -std::sin(6.0 * kPi * q.x) * std::sin(6.0 * kPi * q.y); };
    p.source_sign = 1.0;
    p.analytic = [](const Point& q) {
        const double k = 6.0 * kPi;
        return std::sin(k * q.x) * std::sin(k * q.y) / (2.0 * k * k);
    };
    p.boundary_value = zero;
    return p;
}

ProblemSpec make_problem(const std::string& name, double epsilon) {
    if (name == "exp1") return make_exp1();
    if (name == "exp2") return make_exp2(epsilon);
    if (name == "exp3") return make_exp3();
    if (name == "exp4") return make_exp4();
    throw ContractViolation("unknown problem '" + name + "' (expected exp1|exp2|exp3|exp4)");
}

std::vector<std::string> problem_names() { return {"exp1", "exp2", "exp3", "exp4"}; }

double energy_estimate(const Model& model, const ProblemSpec& problem,
                       std::span<const Point> interior) {
    if (interior.empty()) throw ContractViolation("energy_estimate: no samples");
    std::vector<ModelEval> evals(interior.size());
    model.evaluate_batch_with_gradient(interior, evals);
    double sum = 0.0;
    for (std::size_t k = 0; k < interior.size(); ++k) {
        sum += problem.lagrangian(interior[k], evals[k].u, evals[k].grad_u).value;
    }
    const double e = sum / static_cast<double>(interior.size());
    if (!std::isfinite(e)) throw TrainingError("energy_estimate: non-finite energy");
    return e;
}

double dirichlet_loss(const Model& model, const ProblemSpec& problem,
                      std::span<const Point> boundary) {
    if (boundary.empty()) throw ContractViolation("dirichlet_loss: no samples");
    if (!problem.boundary_value) throw UnsupportedError(problem.name + " has no Dirichlet data");
    std::vector<double> u(boundary.size());
    model.evaluate_batch(boundary, u);
    double sum = 0.0;
    for (std::size_t k = 0; k < boundary.size(); ++k) {
        const double r = u[k] - problem.boundary_value(boundary[k]);
        sum += r * r;
    }
    return sum / static_cast<double>(boundary.size());
}

void sample_interior(std::span<Point> out, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&] {
        double v = unit(rng);
        while (v <= 0.0) v = unit(rng);
        return v;
    };
    for (Point& p : out) {
        p.x = draw();
        p.y = draw();
    }
}

std::vector<Point> sample_interior(std::size_t n, Rng& rng) {
    if (n < 1) throw ContractViolation("sample_interior: n must be >= 1");
    std::vector<Point> pts(n);
    sample_interior(pts, rng);
    return pts;
}

void sample_boundary(std::span<Point> out, Rng& rng, bool stratified) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> edge_dist(0, 3);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const int edge = stratified ? static_cast<int>(k % 4) : edge_dist(rng);
        const double t = unit(rng);
        switch (edge) {
            case 0: out[k] = {0.0, t}; break;
            case 1: out[k] = {1.0, t}; break;
            case 2: out[k] = {t, 0.0}; break;
            default: out[k] = {t, 1.0}; break;
        }
    }
}

std::vector<Point> sample_boundary(std::size_t n, Rng& rng, bool stratified) {
    if (n < 1) throw ContractViolation("sample_boundary: n must be >= 1");
    std::vector<Point> pts(n);
    sample_boundary(pts, rng, stratified);
    return pts;
}

}  // namespace cellpinn
