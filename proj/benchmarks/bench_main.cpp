#include <benchmark/benchmark.h>

#include "simcal/bounds.hpp"
#include "simcal/mode.hpp"
#include "simcal/random.hpp"
#include "simcal/sampler.hpp"

using namespace simcal;

namespace {

// s designs × m outcomes, moderate counts everywhere.
PosteriorModel make_model(int s, int m, std::uint64_t seed = 7) {
    Rng rng = make_rng(seed);
    std::uniform_int_distribution<int> real(0, 40);
    std::uniform_int_distribution<int> sim(1, 400);
    CountTable n(s, m), nt(s, m);
    for (int j = 0; j < s; ++j)
        for (int i = 0; i < m; ++i) {
            n(j, i) = real(rng);
            nt(j, i) = sim(rng);
        }
    std::vector<double> x(static_cast<std::size_t>(s));
    for (int j = 0; j < s; ++j) x[static_cast<std::size_t>(j)] = j;
    return PosteriorModel(ProblemData(x, n, nt), GaussianPriorSpec{});
}

void BM_LogPosterior(benchmark::State& state) {
    const int s = static_cast<int>(state.range(0));
    const PosteriorModel model = make_model(s, 3);
    const ModeResult mode = find_posterior_mode(model);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.log_posterior_pp(mode.p_star.values, mode.p_tilde_star.values));
    }
}
BENCHMARK(BM_LogPosterior)->Arg(2)->Arg(5)->Arg(10);

void BM_Mode(benchmark::State& state) {
    const PosteriorModel model = make_model(static_cast<int>(state.range(0)), 3);
    for (auto _ : state) benchmark::DoNotOptimize(find_posterior_mode(model));
}
BENCHMARK(BM_Mode)->Arg(2)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_BoundInterval(benchmark::State& state) {
    const int s = static_cast<int>(state.range(0));
    const PosteriorModel model = make_model(s, 3);
    const ModeResult mode = find_posterior_mode(model);
    const QueryFunctional f = indicator_functional(s, 3, s - 1, 0);
    const ThresholdSpec spec = ThresholdSpec::from_level(0.975);
    for (auto _ : state) benchmark::DoNotOptimize(bound_interval(model, mode, f, spec));
}
BENCHMARK(BM_BoundInterval)->Arg(2)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_Sampler(benchmark::State& state) {
    const PosteriorModel model = make_model(3, 3);
    const ModeResult mode = find_posterior_mode(model);
    SamplerOptions o;
    o.n_draws = 1000;
    o.burn_in = 200;
    for (auto _ : state) benchmark::DoNotOptimize(mh_sample(model, mode, o));
}
BENCHMARK(BM_Sampler)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
