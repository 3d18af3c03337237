// Serial reference path vs OpenMP path of the data-parallel kernels.

#include "degen/analysis.hpp"
#include "degen/grid.hpp"
#include "degen/mesh.hpp"
#include "degen/solve.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace degen;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) ? "openmp" : "serial"); }

void BM_ClassifyGrid(benchmark::State& state)
{
    const Field f = make_kink_circle();
    GridSpec spec;
    spec.box = Box::square(2.0);
    spec.h = 0.04;
    spec.ladders = Ladders::for_field(f);
    for (auto _ : state) benchmark::DoNotOptimize(classify_grid(f, spec, exec_of(state)));
    label(state);
}

void BM_Residual(benchmark::State& state)
{
    const Mesh mesh = build_mesh(Domain::disk(1.0), 0.02);
    const auto u = interpolate(mesh, [](const Vec2& x) { return std::sin(3 * x.x()) * x.y(); });
    const Field f = make_p_laplacian(4.0);
    for (auto _ : state) benchmark::DoNotOptimize(residual_full(f, mesh, u, exec_of(state)));
    label(state);
}

void BM_BallSamples(benchmark::State& state)
{
    auto mesh = std::make_shared<const Mesh>(build_mesh(Domain::disk(1.0), 0.02));
    auto sol = std::make_shared<const DiscreteSolution>(
        make_solution(mesh, interpolate(*mesh, [](const Vec2& x) { return x.x() * x.x() - x.y() * x.y(); })));
    const GradientField g = GradientField::from_solution(sol);
    for (auto _ : state) benchmark::DoNotOptimize(g.ball_samples(Vec2(0.1, -0.2), 0.6, exec_of(state)));
    label(state);
}

void BM_SuperlevelMass(benchmark::State& state)
{
    const ScalarField v = random_smooth_field(3, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(superlevel_mass_fraction(v, 0.75, 512, exec_of(state)));
    label(state);
}

void BM_RecoverHessians(benchmark::State& state)
{
    auto mesh = std::make_shared<const Mesh>(build_mesh(Domain::disk(1.0), 0.02));
    const DiscreteSolution sol =
        make_solution(mesh, interpolate(*mesh, [](const Vec2& x) { return x.x() * x.x() - x.y() * x.y(); }));
    for (auto _ : state) benchmark::DoNotOptimize(recover_hessians(sol, 1, exec_of(state)));
    label(state);
}

}  // namespace

BENCHMARK(BM_ClassifyGrid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Residual)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BallSamples)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SuperlevelMass)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RecoverHessians)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
