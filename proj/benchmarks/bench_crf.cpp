#include "ecpe/crf.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace ecpe;

struct Instance {
    Matrix emissions;
    crf::CrfParams params;
    std::vector<int> gold;
};

Instance make(Index steps, Index labels)
{
    Rng rng(7);
    Instance in{Matrix(steps, labels), crf::CrfParams::zeros(labels), {}};
    fill_normal(in.emissions, 1.0, rng);
    fill_normal(in.params.transitions, 0.5, rng);
    for (Index t = 0; t < steps; ++t) in.gold.push_back(static_cast<int>(t % labels));
    return in;
}

void BM_LogPartition(benchmark::State& state)
{
    const Instance in = make(state.range(0), 7);
    for (auto _ : state) benchmark::DoNotOptimize(crf::log_partition(in.emissions, in.params));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogPartition)->Arg(8)->Arg(32)->Arg(128);

void BM_Viterbi(benchmark::State& state)
{
    const Instance in = make(state.range(0), 7);
    for (auto _ : state) benchmark::DoNotOptimize(crf::viterbi(in.emissions, in.params));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Viterbi)->Arg(8)->Arg(32)->Arg(128);

void BM_CrfGradients(benchmark::State& state)
{
    const Instance in = make(state.range(0), 7);
    for (auto _ : state) benchmark::DoNotOptimize(crf::gradients(in.emissions, in.params, in.gold));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CrfGradients)->Arg(8)->Arg(32);

} // namespace
