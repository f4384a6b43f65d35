// Parallel Euler-Maruyama kernel against the serial reference loop.

#include <benchmark/benchmark.h>

#include "income/simulate.hpp"

using namespace income;

namespace {

LangevinParams params()
{
    LangevinParams p;
    p.M = 1.6;
    p.labour_rate = PiecewiseLinear(1.6);
    p.dt = 1e-3;
    return p;
}

void BM_reference(benchmark::State& state)
{
    const auto p = params();
    AgentPopulation pop = make_population(static_cast<std::size_t>(state.range(0)), 1.0, 1);
    for (auto _ : state) {
        reference::advance(pop, p, 100);
        benchmark::DoNotOptimize(pop.incomes.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 100);
}

void BM_parallel(benchmark::State& state)
{
    const auto p = params();
    AgentPopulation pop = make_population(static_cast<std::size_t>(state.range(0)), 1.0, 1);
    for (auto _ : state) {
        advance(pop, p, 100, ParallelOptions{static_cast<int>(state.range(1))});
        benchmark::DoNotOptimize(pop.incomes.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 100);
}

}  // namespace

BENCHMARK(BM_reference)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_parallel)->Args({100000, 1})->Args({100000, 2})->Args({100000, 4})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
