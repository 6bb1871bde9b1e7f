#pragma once

#include "ecpe/corpus.hpp"

#include <array>
#include <cstdint>

namespace ecpe {

// Generates labeled conversations whose pairs follow a fixed rule: every
// non-neutral utterance u is caused by itself and, when u > 1, by u - 1.
// Combined with a PlantedRule provider, every stage label is recoverable
// from the features.
struct SyntheticCorpusOptions {
    int num_conversations = 200;
    int min_length = 5;
    int max_length = 15;
    std::uint64_t seed = 0;
    // Sampling weights per emotion index; skewed toward neutral by default.
    std::array<double, kNumEmotions> emotion_weights = {0.11, 0.05, 0.05, 0.17, 0.40, 0.09, 0.13};
};

Dataset synthesize_dataset(const SyntheticCorpusOptions& options);

} // namespace ecpe
