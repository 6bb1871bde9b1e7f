#pragma once

// Stage training data, negative pair sampling, training loops and end-to-end
// inference.

#include "ecpe/corpus.hpp"
#include "ecpe/embeddings.hpp"
#include "ecpe/metrics.hpp"
#include "ecpe/models.hpp"
#include "ecpe/optim.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace ecpe {

// ---------------------------------------------------------------------------
// Stage data

struct StageExample {
    int conversation_id = 0;
    Matrix features;          // T x D
    std::vector<int> labels;  // emotion indices or cause flags
};

std::vector<StageExample> emotion_examples(const Dataset& dataset, const EmbeddingProvider& provider);
std::vector<StageExample> cause_examples(const Dataset& dataset, const EmbeddingProvider& provider);

// ---------------------------------------------------------------------------
// Pair sampling

struct PairExample {
    int conversation_id = 0;
    int emotion_utterance_id = 0;
    int cause_utterance_id = 0;
    int label = 0;
    auto operator<=>(const PairExample&) const = default;
};

using UtterancePair = std::pair<int, int>;  // (emotion id, cause id), 1-based

// Every (emotion utterance, utterance) combination in the conversation for the
// given emotion slots, minus the gold pairs.
std::vector<UtterancePair> negative_candidate_space(const Conversation& conversation,
                                                    std::span<const int> emotion_utterance_ids);

// Draws min(ratio * |gold|, |space|) negatives uniformly without replacement.
std::vector<PairExample> sample_negative_pairs(int conversation_id,
                                               std::span<const EmotionCausePair> gold_pairs,
                                               std::span<const UtterancePair> candidate_space,
                                               int ratio, std::uint64_t seed);

// Gold positives plus sampled negatives, emotion slots restricted to the gold
// non-neutral utterances.
std::vector<PairExample> training_pairs(const Conversation& conversation, int ratio,
                                        std::uint64_t seed);

// Frozen stage-model representations, one entry per conversation.
struct ConversationReps {
    int conversation_id = 0;
    Matrix emotion;  // T x Re
    Matrix cause;    // T x Rc
};

std::vector<ConversationReps> compute_representations(const EmotionModel& emotion,
                                                      const CauseModel& cause,
                                                      const Dataset& dataset,
                                                      const EmbeddingProvider& provider);

// Gathers examples into a batch. `reps_by_id` maps conversation id to its reps.
PairBatch make_pair_batch(std::span<const PairExample> examples,
                          const std::function<const ConversationReps&(int)>& reps_by_id);

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
    int epochs = 1;
    AdamWConfig optimizer;
    double warmup_fraction = 0.1;
    int batch_size = 64;  // dense models and pairing; sequence models use one conversation
    std::uint64_t seed = 0;
    int negative_ratio = 5;
};

struct EpochReport {
    int epoch = 0;  // 1-based
    std::int64_t step = 0;
    double lr = 0.0;
    double train_loss = 0.0;  // mean over batches
    eval::StageMetrics val;
    bool has_val = false;
};

// A stage reduced to what the loop needs.
struct StageTask {
    ParameterList params;
    int batches_per_epoch = 0;
    // Called once per epoch before any batch; shuffles or resamples.
    std::function<void(int epoch)> begin_epoch;
    // Forward + backward for one batch; returns the batch loss.
    std::function<double(int batch, Rng& dropout_rng)> run_batch;
    // Optional validation.
    std::function<eval::StageMetrics()> validate;
};

class Trainer {
public:
    Trainer(StageTask task, const TrainOptions& options);

    int epochs_done() const { return epoch_; }
    std::int64_t total_steps() const { return schedule_.total_steps; }
    const WarmupSchedule& schedule() const { return schedule_; }

    // Throws NumericError with epoch/step context on a non-finite loss.
    EpochReport run_epoch();

    // Resume support: parameters, optimizer moments and counters.
    void save_state(Checkpoint& ckpt) const;
    void restore_state(const Checkpoint& ckpt);

private:
    StageTask task_;
    TrainOptions options_;
    AdamW optimizer_;
    WarmupSchedule schedule_;
    int epoch_ = 0;
};

StageTask emotion_task(EmotionModel& model, std::vector<StageExample> train,
                       std::vector<StageExample> val, Vector class_weights,
                       const TrainOptions& options);

StageTask cause_task(CauseModel& model, std::vector<StageExample> train,
                     std::vector<StageExample> val, const TrainOptions& options);

// Teacher-forced pairing: gold emotion slots, negatives resampled each epoch.
// Validation classifies gold positives plus a fixed negative sample.
StageTask pairing_task(PairingModel& model, const Dataset& train, std::vector<ConversationReps> train_reps,
                       const Dataset& val, std::vector<ConversationReps> val_reps,
                       const TrainOptions& options);

// ---------------------------------------------------------------------------
// Inference

// Emotion utterances are those predicted non-neutral, causes those predicted
// positive; a pair is emitted when the pairing probability clears the
// threshold. Output is sorted and free of duplicates.
std::vector<EmotionCausePair> predict_pairs(const EmotionModel& emotion, const CauseModel& cause,
                                            const PairingModel& pairing, const Matrix& features);

// Returns `input` with predicted emotions and pairs filled in.
Dataset predict_dataset(const EmotionModel& emotion, const CauseModel& cause,
                        const PairingModel& pairing, const Dataset& input,
                        const EmbeddingProvider& provider);

// Throws ShapeError when the pairing model was built for other rep widths.
void check_compatible(const EmotionModel& emotion, const CauseModel& cause,
                      const PairingModel& pairing);

} // namespace ecpe
