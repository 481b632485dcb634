// Table-driven OpenMP kernel against the serial reference, plus surface construction.
#include <benchmark/benchmark.h>

#include "ocs/sim_engine.hpp"
#include "ocs/value_surface.hpp"

using namespace ocs;

namespace {

const GSurface& surface(int which) {
    static const GSurface threshold = build_surface(ModelParams::from_normalized(1, 2, 0.1, 0.5));
    static const GSurface cash = build_surface(ModelParams::from_normalized(1, 1, 0.1, 0.5));
    return which == 0 ? threshold : cash;
}

SimConfig config(std::int64_t paths) {
    SimConfig c;
    c.n_paths = static_cast<std::size_t>(paths);
    c.horizon_T = 20;
    return c;
}

void BM_mc_parallel(benchmark::State& st) {
    const GSurface& s = surface(static_cast<int>(st.range(0)));
    const SimConfig c = config(st.range(1));
    for (auto _ : st) benchmark::DoNotOptimize(mc_value(s, {1, 1, 1, 0}, c).estimate);
    st.counters["threads"] = configured_threads();
    st.SetItemsProcessed(st.iterations() * st.range(1));
}

void BM_mc_serial(benchmark::State& st) {
    const GSurface& s = surface(static_cast<int>(st.range(0)));
    const SimConfig c = config(st.range(1));
    for (auto _ : st) benchmark::DoNotOptimize(mc_value_serial(s, {1, 1, 1, 0}, c).estimate);
    st.SetItemsProcessed(st.iterations() * st.range(1));
}

void BM_build_surface(benchmark::State& st) {
    const ModelParams p = st.range(0) == 0 ? ModelParams::from_normalized(1, 2, 0.1, 0.5)
                                           : ModelParams::from_normalized(1, 1, 0.1, 0.5);
    for (auto _ : st) benchmark::DoNotOptimize(build_surface(p).u_max);
}

}  // namespace

// range(0): 0 threshold sale, 1 cash first; range(1): paths.
BENCHMARK(BM_mc_parallel)->Args({0, 64})->Args({1, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mc_serial)->Args({0, 64})->Args({1, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_build_surface)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
