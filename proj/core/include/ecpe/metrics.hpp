#pragma once

// Per-stage weighted precision / recall / F1 and emotion-cause pair scoring.

#include "ecpe/corpus.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <span>
#include <vector>

namespace ecpe::eval {

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;  // gold count
    std::int64_t predicted = 0;
    std::int64_t true_positive = 0;
};

inline double f1_score(double precision, double recall)
{
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

struct StageMetrics {
    std::vector<ClassScores> per_class;
    // Averages weighted by gold support.
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    // Unweighted mean over classes with non-zero support.
    double macro_f1 = 0.0;
    double accuracy = 0.0;
};

// Throws ShapeError on a length mismatch and ValidationError on labels
// outside [0, n_classes).
StageMetrics stage_metrics(std::span<const int> predicted, std::span<const int> gold, int n_classes);

// A pair anchored to its conversation; the unit of final scoring.
struct ScoredPair {
    int conversation_id = 0;
    EmotionCausePair pair;
    auto operator<=>(const ScoredPair&) const = default;
};

struct PairMetrics {
    // Indexed by emotion index; the neutral slot stays zero.
    std::array<ClassScores, kNumEmotions> per_emotion{};
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    double macro_f1 = 0.0;
    // Non-neutral emotions that appear in gold or predictions.
    int macro_classes = 0;
};

// Exact-match scoring on (conversation, emotion utterance, emotion, cause
// utterance). Both sides are deduplicated first. Neutral pairs are rejected.
PairMetrics pair_metrics(std::span<const ScoredPair> predicted, std::span<const ScoredPair> gold);

std::vector<ScoredPair> collect_pairs(const Dataset& dataset);

nlohmann::json to_json(const StageMetrics& m, std::span<const std::string> class_names);
nlohmann::json to_json(const PairMetrics& m);

// Scores a prediction file against gold: emotion and candidate-cause stage
// metrics where labels exist on both sides, plus pair metrics. Conversation ids
// and utterance counts must agree.
nlohmann::json score_datasets(const Dataset& gold, const Dataset& predicted);

} // namespace ecpe::eval
