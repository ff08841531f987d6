#include <benchmark/benchmark.h>

#include <cellpinn/grid.hpp>
#include <cellpinn/model.hpp>
#include <cellpinn/problems.hpp>
#include <cellpinn/reference.hpp>

using namespace cellpinn;

namespace {

Model default_model(Rng& rng) { return Model::cell_mlp(GridConfig{}, MlpConfig{}, rng); }

}  // namespace

static void BM_Encode(benchmark::State& state) {
    Rng rng(1);
    const MultiresGrid grid(GridConfig{static_cast<int>(state.range(0)), 87, 1.12, 2});
    std::vector<double> params(grid.parameter_count());
    grid.initialize(params, rng, 1.0);
    const auto pts = sample_interior(4096, rng);
    std::vector<double> h(static_cast<std::size_t>(grid.feature_dim()));
    for (auto _ : state) {
        for (const Point& x : pts) grid.encode(params, x, h);
        benchmark::DoNotOptimize(h.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}
BENCHMARK(BM_Encode)->Arg(1)->Arg(4)->Arg(16);

static void BM_Evaluate(benchmark::State& state) {
    Rng rng(2);
    const Model m = default_model(rng);
    const auto pts = sample_interior(4096, rng);
    std::vector<ModelEval> out(pts.size());
    for (auto _ : state) {
        m.evaluate_batch_with_gradient(pts, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}
BENCHMARK(BM_Evaluate);

static void BM_EnergyGradient(benchmark::State& state) {
    Rng rng(3);
    const Model m = default_model(rng);
    const auto problem = make_exp2();
    const auto pts = sample_interior(static_cast<std::size_t>(state.range(0)), rng);
    std::vector<double> grad(m.parameter_count());
    for (auto _ : state) {
        std::fill(grad.begin(), grad.end(), 0.0);
        benchmark::DoNotOptimize(m.accumulate_loss_gradient(pts, problem.energy_loss(), 1.0, grad));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EnergyGradient)->Arg(3000)->Arg(30000)->Unit(benchmark::kMillisecond);

static void BM_EnergyGradientFrozenHead(benchmark::State& state) {
    Rng rng(4);
    Model m = default_model(rng);
    m.set_trainable(false, true, false);
    const auto problem = make_exp2();
    const auto pts = sample_interior(30000, rng);
    std::vector<double> grad(m.parameter_count());
    for (auto _ : state) {
        std::fill(grad.begin(), grad.end(), 0.0);
        benchmark::DoNotOptimize(m.accumulate_loss_gradient(pts, problem.energy_loss(), 1.0, grad));
    }
}
BENCHMARK(BM_EnergyGradientFrozenHead)->Unit(benchmark::kMillisecond);

static void BM_PlainMlpGradient(benchmark::State& state) {
    Rng rng(5);
    const Model m = Model::plain_mlp(rng);
    const auto problem = make_exp2();
    const auto pts = sample_interior(3000, rng);
    std::vector<double> grad(m.parameter_count());
    for (auto _ : state) {
        std::fill(grad.begin(), grad.end(), 0.0);
        benchmark::DoNotOptimize(m.accumulate_loss_gradient(pts, problem.energy_loss(), 1.0, grad));
    }
}
BENCHMARK(BM_PlainMlpGradient)->Unit(benchmark::kMillisecond);

static void BM_FdSolve(benchmark::State& state) {
    const auto problem = make_exp2();
    for (auto _ : state) {
        benchmark::DoNotOptimize(fd_solve(problem, static_cast<int>(state.range(0))).values.data());
    }
}
BENCHMARK(BM_FdSolve)->Arg(100)->Arg(250)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
