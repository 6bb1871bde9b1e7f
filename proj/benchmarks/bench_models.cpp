#include "ecpe/models.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace ecpe;

// Conversation length 10, fused width 32; range(0) is the hidden size,
// range(1) the layer count.
EmotionModel make_model(EmotionVariant variant, const benchmark::State& state)
{
    EmotionModelConfig c;
    c.variant = variant;
    c.input_width = 32;
    c.hidden = state.range(0);
    c.num_layers = static_cast<int>(state.range(1));
    EmotionModel m(c);
    Rng rng(3);
    m.init(rng);
    return m;
}

Matrix features()
{
    Rng rng(5);
    Matrix x(10, 32);
    fill_normal(x, 1.0, rng);
    return x;
}

const std::vector<int> kGold{4, 4, 3, 3, 0, 4, 6, 5, 4, 1};

void BM_BilstmForward(benchmark::State& state)
{
    const EmotionModel m = make_model(EmotionVariant::bilstm, state);
    const Matrix x = features();
    for (auto _ : state) benchmark::DoNotOptimize(m.scores(x));
}
BENCHMARK(BM_BilstmForward)->Args({64, 2})->Args({256, 4})->Unit(benchmark::kMicrosecond);

void BM_BilstmForwardBackward(benchmark::State& state)
{
    EmotionModel m = make_model(EmotionVariant::bilstm, state);
    const Matrix x = features();
    const Vector w = Vector::Ones(kNumEmotions);
    for (auto _ : state) benchmark::DoNotOptimize(m.accumulate_gradients(x, kGold, w, nullptr));
}
BENCHMARK(BM_BilstmForwardBackward)->Args({64, 2})->Args({256, 4})->Unit(benchmark::kMicrosecond);

void BM_BilstmCrfForwardBackward(benchmark::State& state)
{
    EmotionModel m = make_model(EmotionVariant::bilstm_crf, state);
    const Matrix x = features();
    const Vector w = Vector::Ones(kNumEmotions);
    for (auto _ : state) benchmark::DoNotOptimize(m.accumulate_gradients(x, kGold, w, nullptr));
}
BENCHMARK(BM_BilstmCrfForwardBackward)->Args({64, 2})->Unit(benchmark::kMicrosecond);

} // namespace
