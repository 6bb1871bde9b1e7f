#pragma once

// The three stage models: emotion classification, candidate-cause detection
// and emotion-cause pairing.

#include "ecpe/checkpoint.hpp"
#include "ecpe/corpus.hpp"
#include "ecpe/crf.hpp"
#include "ecpe/dense.hpp"
#include "ecpe/lstm.hpp"
#include "ecpe/tensor.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace ecpe {

enum class EncoderKind { dense, bilstm };
enum class EmotionVariant { dense, bilstm, bilstm_crf };
enum class CauseVariant { dense, bilstm };
enum class CrfDecode { viterbi, marginal };

std::string_view variant_name(EmotionVariant v);
std::string_view variant_name(CauseVariant v);
EmotionVariant parse_emotion_variant(std::string_view s);
CauseVariant parse_cause_variant(std::string_view s);

struct EncoderConfig {
    EncoderKind kind = EncoderKind::dense;
    Index input_width = 0;
    Index hidden = 256;  // projection width, or hidden size per direction
    int num_layers = 1;  // BiRNN only
    double embedding_dropout = 0.3;
    double inter_layer_dropout = 0.3;
};

// Dropout on the fused features, then either a tanh projection (dense) or a
// stacked BiLSTM. Its output is the utterance representation handed to the
// pairing stage.
class UtteranceEncoder {
public:
    struct Cache {
        Matrix input;  // features after dropout
        Matrix output;
        BiRnnStack::Cache rnn;
    };

    UtteranceEncoder() = default;
    UtteranceEncoder(const std::string& name, const EncoderConfig& config);

    const EncoderConfig& config() const { return config_; }
    Index output_width() const;

    void init(Rng& rng);
    // Dropout is applied only when `dropout_rng` is non-null.
    Matrix forward(const Matrix& features, Rng* dropout_rng, Cache* cache) const;
    void backward(const Cache& cache, const Matrix& d_output);

    ParameterList parameters();
    BiRnnStack& rnn() { return rnn_; }

private:
    EncoderConfig config_;
    Dense projection_;
    BiRnnStack rnn_;
};

struct EmotionModelConfig {
    EmotionVariant variant = EmotionVariant::dense;
    Index input_width = 0;
    Index hidden = 256;
    int num_layers = 4;
    double embedding_dropout = 0.3;
    double inter_layer_dropout = 0.3;
    CrfDecode decode = CrfDecode::viterbi;

    nlohmann::json to_json() const;
    static EmotionModelConfig from_json(const nlohmann::json& j);
};

class EmotionModel {
public:
    explicit EmotionModel(const EmotionModelConfig& config);

    const EmotionModelConfig& config() const { return config_; }
    bool uses_crf() const { return config_.variant == EmotionVariant::bilstm_crf; }
    Index representation_width() const { return encoder_.output_width(); }

    void init(Rng& rng);

    // T x 7: logits, or CRF emissions for the bilstm_crf variant.
    Matrix scores(const Matrix& features, Rng* dropout_rng = nullptr) const;
    Matrix representations(const Matrix& features) const;

    // Mean weighted cross-entropy, or the CRF negative log-likelihood.
    double loss(const Matrix& scores, std::span<const int> gold, const Vector& class_weights) const;

    // Forward, loss and backward on one batch; gradients accumulate.
    double accumulate_gradients(const Matrix& features, std::span<const int> gold,
                                const Vector& class_weights, Rng* dropout_rng);

    std::vector<int> predict_indices(const Matrix& features) const;
    std::vector<Emotion> predict(const Matrix& features) const;

    crf::CrfParams crf_params() const;
    ParameterList parameters();

    Checkpoint to_checkpoint() const;
    static EmotionModel from_checkpoint(const Checkpoint& ckpt);

    UtteranceEncoder& encoder() { return encoder_; }
    Dense& head() { return head_; }
    Parameter& crf_transitions() { return transitions_; }

private:
    void check_width(const Matrix& features) const;

    EmotionModelConfig config_;
    UtteranceEncoder encoder_;
    Dense head_;
    Parameter transitions_;
    Parameter start_;
    Parameter end_;
};

struct CauseModelConfig {
    CauseVariant variant = CauseVariant::dense;
    Index input_width = 0;
    Index hidden = 256;
    int num_layers = 3;
    double embedding_dropout = 0.3;
    double inter_layer_dropout = 0.3;
    double threshold = 0.5;

    nlohmann::json to_json() const;
    static CauseModelConfig from_json(const nlohmann::json& j);
};

class CauseModel {
public:
    explicit CauseModel(const CauseModelConfig& config);

    const CauseModelConfig& config() const { return config_; }
    Index representation_width() const { return encoder_.output_width(); }

    void init(Rng& rng);

    Matrix logits(const Matrix& features, Rng* dropout_rng = nullptr) const;  // T x 1
    Matrix representations(const Matrix& features) const;
    Vector probabilities(const Matrix& features) const;

    double loss(const Matrix& logits, std::span<const int> gold) const;
    double accumulate_gradients(const Matrix& features, std::span<const int> gold,
                                Rng* dropout_rng);

    // 1 where the probability is strictly above the threshold.
    std::vector<int> predict(const Matrix& features) const;

    ParameterList parameters();

    Checkpoint to_checkpoint() const;
    static CauseModel from_checkpoint(const Checkpoint& ckpt);

    UtteranceEncoder& encoder() { return encoder_; }
    Dense& head() { return head_; }

private:
    void check_width(const Matrix& features) const;

    CauseModelConfig config_;
    UtteranceEncoder encoder_;
    Dense head_;
};

struct PairingModelConfig {
    Index emotion_rep_width = 0;
    Index cause_rep_width = 0;
    int max_distance = 12;
    Index distance_dim = 32;
    double threshold = 0.5;

    Index input_width() const { return emotion_rep_width + cause_rep_width + distance_dim; }

    nlohmann::json to_json() const;
    static PairingModelConfig from_json(const nlohmann::json& j);
};

// A batch of (emotion utterance, cause utterance) candidates.
struct PairBatch {
    Matrix emotion_reps;  // B x Re
    Matrix cause_reps;    // B x Rc
    std::vector<int> distances;  // cause id - emotion id
    std::vector<int> labels;     // may be empty at inference
};

class PairingModel {
public:
    explicit PairingModel(const PairingModelConfig& config);

    const PairingModelConfig& config() const { return config_; }

    // Table rows from standard normal draws; head uniform, zero bias.
    void init(Rng& rng);

    // Row of the distance table after clipping to [-max_distance, max_distance].
    int distance_row(int distance) const;

    RowVector pair_representation(const RowVector& emotion_rep, const RowVector& cause_rep,
                                  int distance) const;
    Matrix pair_inputs(const PairBatch& batch) const;

    Matrix logits(const PairBatch& batch) const;  // B x 1
    Vector probabilities(const PairBatch& batch) const;
    double loss(const PairBatch& batch) const;
    double accumulate_gradients(const PairBatch& batch);

    ParameterList parameters() { return {&distance_table, &head_.weight, &head_.bias}; }

    Checkpoint to_checkpoint() const;
    static PairingModel from_checkpoint(const Checkpoint& ckpt);

    Dense& head() { return head_; }

    Parameter distance_table;  // (2 * max_distance + 1) x distance_dim

private:
    void check_batch(const PairBatch& batch) const;

    PairingModelConfig config_;
    Dense head_;
};

// Stage tag written into every checkpoint's config block.
std::string checkpoint_stage(const Checkpoint& ckpt);

} // namespace ecpe
