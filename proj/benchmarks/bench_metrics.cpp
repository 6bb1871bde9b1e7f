#include "ecpe/metrics.hpp"
#include "ecpe/synthetic.hpp"
#include "ecpe/tensor.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace ecpe;

void BM_StageMetrics(benchmark::State& state)
{
    Rng rng(11);
    std::uniform_int_distribution<int> label(0, kNumEmotions - 1);
    std::vector<int> gold(static_cast<std::size_t>(state.range(0))), pred(gold.size());
    for (std::size_t i = 0; i < gold.size(); ++i) {
        gold[i] = label(rng);
        pred[i] = label(rng);
    }
    for (auto _ : state) benchmark::DoNotOptimize(eval::stage_metrics(pred, gold, kNumEmotions));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_StageMetrics)->Arg(1000)->Arg(13509);

void BM_ScoreDatasets(benchmark::State& state)
{
    SyntheticCorpusOptions o;
    o.num_conversations = static_cast<int>(state.range(0));
    const Dataset d = synthesize_dataset(o);
    for (auto _ : state) benchmark::DoNotOptimize(eval::score_datasets(d, d));
}
BENCHMARK(BM_ScoreDatasets)->Arg(200)->Arg(1344)->Unit(benchmark::kMillisecond);

} // namespace
