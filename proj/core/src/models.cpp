#include "ecpe/models.hpp"

#include "ecpe/embeddings.hpp"
#include "ecpe/error.hpp"
#include "ecpe/losses.hpp"

#include <algorithm>

namespace ecpe {

namespace {

template <typename T>
T value_or(const nlohmann::json& j, const char* key, T fallback)
{
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<T>();
}

std::vector<int> row_argmax(const Matrix& scores)
{
    std::vector<int> out(static_cast<std::size_t>(scores.rows()));
    for (Index t = 0; t < scores.rows(); ++t) {
        Index arg = 0;
        for (Index k = 1; k < scores.cols(); ++k) {
            if (scores(t, k) > scores(t, arg)) {
                arg = k;
            }
        }
        out[static_cast<std::size_t>(t)] = static_cast<int>(arg);
    }
    return out;
}

void require_stage(const Checkpoint& ckpt, std::string_view stage)
{
    const std::string found = checkpoint_stage(ckpt);
    if (found != stage) {
        throw LoadError("expected a " + std::string(stage) + " checkpoint, found '" + found + "'");
    }
}

} // namespace

std::string_view variant_name(EmotionVariant v)
{
    switch (v) {
    case EmotionVariant::dense: return "dense";
    case EmotionVariant::bilstm: return "bilstm";
    case EmotionVariant::bilstm_crf: return "bilstm_crf";
    }
    return "unknown";
}

std::string_view variant_name(CauseVariant v)
{
    return v == CauseVariant::dense ? "dense" : "bilstm";
}

EmotionVariant parse_emotion_variant(std::string_view s)
{
    if (s == "dense") return EmotionVariant::dense;
    if (s == "bilstm") return EmotionVariant::bilstm;
    if (s == "bilstm_crf") return EmotionVariant::bilstm_crf;
    throw ValidationError("unknown emotion variant '" + std::string(s) +
                          "' (expected dense, bilstm or bilstm_crf)");
}

CauseVariant parse_cause_variant(std::string_view s)
{
    if (s == "dense") return CauseVariant::dense;
    if (s == "bilstm") return CauseVariant::bilstm;
    throw ValidationError("unknown cause variant '" + std::string(s) + "' (expected dense or bilstm)");
}

std::string checkpoint_stage(const Checkpoint& ckpt)
{
    return value_or<std::string>(ckpt.config, "stage", "");
}

// ---------------------------------------------------------------------------
// UtteranceEncoder

UtteranceEncoder::UtteranceEncoder(const std::string& name, const EncoderConfig& config)
    : config_(config)
{
    if (config.input_width < 1 || config.hidden < 1) {
        throw ShapeError(name + ": encoder widths must be positive");
    }
    if (!(config.embedding_dropout >= 0.0 && config.embedding_dropout < 1.0)) {
        throw ShapeError(name + ": embedding dropout must lie in [0, 1)");
    }
    if (config.kind == EncoderKind::dense) {
        projection_ = Dense(name + ".proj", config.input_width, config.hidden);
    } else {
        rnn_ = BiRnnStack(name + ".rnn", {config.input_width, config.hidden, config.num_layers,
                                          config.inter_layer_dropout});
    }
}

Index UtteranceEncoder::output_width() const
{
    return config_.kind == EncoderKind::dense ? config_.hidden : 2 * config_.hidden;
}

void UtteranceEncoder::init(Rng& rng)
{
    if (config_.kind == EncoderKind::dense) {
        projection_.init(rng);
    } else {
        rnn_.init(rng);
    }
}

Matrix UtteranceEncoder::forward(const Matrix& features, Rng* dropout_rng, Cache* cache) const
{
    Matrix x = features;
    if (dropout_rng && config_.embedding_dropout > 0.0) {
        x = x.cwiseProduct(dropout_mask(x.rows(), x.cols(), config_.embedding_dropout, *dropout_rng));
    }
    Matrix out;
    if (config_.kind == EncoderKind::dense) {
        out = projection_.forward(x).array().tanh();
    } else {
        out = rnn_.forward(x, dropout_rng, cache ? &cache->rnn : nullptr);
    }
    if (cache) {
        cache->input = std::move(x);
        cache->output = out;
    }
    return out;
}

void UtteranceEncoder::backward(const Cache& cache, const Matrix& d_output)
{
    if (config_.kind == EncoderKind::dense) {
        const Matrix d_pre = d_output.array() * (1.0 - cache.output.array().square());
        projection_.backward(cache.input, d_pre);
    } else {
        rnn_.backward(cache.rnn, d_output);
    }
}

ParameterList UtteranceEncoder::parameters()
{
    return config_.kind == EncoderKind::dense ? projection_.parameters() : rnn_.parameters();
}

// ---------------------------------------------------------------------------
// EmotionModel

nlohmann::json EmotionModelConfig::to_json() const
{
    return {
        {"variant", std::string(variant_name(variant))},
        {"input_width", input_width},
        {"hidden", hidden},
        {"num_layers", num_layers},
        {"embedding_dropout", embedding_dropout},
        {"inter_layer_dropout", inter_layer_dropout},
        {"decode", decode == CrfDecode::viterbi ? "viterbi" : "marginal"},
    };
}

EmotionModelConfig EmotionModelConfig::from_json(const nlohmann::json& j)
{
    EmotionModelConfig c;
    c.variant = parse_emotion_variant(value_or<std::string>(j, "variant", "dense"));
    c.input_width = value_or<Index>(j, "input_width", 0);
    c.hidden = value_or<Index>(j, "hidden", c.hidden);
    c.num_layers = value_or<int>(j, "num_layers", c.num_layers);
    c.embedding_dropout = value_or<double>(j, "embedding_dropout", c.embedding_dropout);
    c.inter_layer_dropout = value_or<double>(j, "inter_layer_dropout", c.inter_layer_dropout);
    const auto decode = value_or<std::string>(j, "decode", "viterbi");
    if (decode != "viterbi" && decode != "marginal") {
        throw ValidationError("unknown CRF decode '" + decode + "'");
    }
    c.decode = decode == "viterbi" ? CrfDecode::viterbi : CrfDecode::marginal;
    return c;
}

EmotionModel::EmotionModel(const EmotionModelConfig& config)
    : config_(config),
      encoder_("emotion.encoder",
               {config.variant == EmotionVariant::dense ? EncoderKind::dense : EncoderKind::bilstm,
                config.input_width, config.hidden, config.num_layers, config.embedding_dropout,
                config.inter_layer_dropout}),
      head_("emotion.head", encoder_.output_width(), kNumEmotions)
{
    if (uses_crf()) {
        transitions_ = Parameter("emotion.crf.transitions", kNumEmotions, kNumEmotions);
        start_ = Parameter("emotion.crf.start", kNumEmotions, 1);
        end_ = Parameter("emotion.crf.end", kNumEmotions, 1);
    }
}

void EmotionModel::init(Rng& rng)
{
    encoder_.init(rng);
    head_.init(rng);
    if (uses_crf()) {
        transitions_.value.setZero();
        start_.value.setZero();
        end_.value.setZero();
    }
}

void EmotionModel::check_width(const Matrix& features) const
{
    if (features.cols() != config_.input_width) {
        throw ShapeError("emotion model expects feature width " + std::to_string(config_.input_width) +
                         ", got " + std::to_string(features.cols()));
    }
    if (features.rows() < 1) {
        throw ShapeError("emotion model needs at least one utterance");
    }
}

Matrix EmotionModel::scores(const Matrix& features, Rng* dropout_rng) const
{
    check_width(features);
    return head_.forward(encoder_.forward(features, dropout_rng, nullptr));
}

Matrix EmotionModel::representations(const Matrix& features) const
{
    check_width(features);
    return encoder_.forward(features, nullptr, nullptr);
}

crf::CrfParams EmotionModel::crf_params() const
{
    if (!uses_crf()) {
        throw ValidationError("emotion model variant has no CRF layer");
    }
    return {transitions_.value, start_.value.col(0), end_.value.col(0)};
}

double EmotionModel::loss(const Matrix& scores, std::span<const int> gold, const Vector& class_weights) const
{
    if (uses_crf()) {
        return crf::nll(scores, crf_params(), gold);
    }
    return weighted_cross_entropy_mean(scores, gold, class_weights).loss;
}

double EmotionModel::accumulate_gradients(const Matrix& features, std::span<const int> gold,
                                          const Vector& class_weights, Rng* dropout_rng)
{
    check_width(features);
    UtteranceEncoder::Cache cache;
    const Matrix reps = encoder_.forward(features, dropout_rng, &cache);
    const Matrix s = head_.forward(reps);

    double loss_value = 0.0;
    Matrix d_scores;
    if (uses_crf()) {
        const crf::CrfParams params = crf_params();
        loss_value = crf::nll(s, params, gold);
        crf::CrfGradients g = crf::gradients(s, params, gold);
        transitions_.grad += g.transitions;
        start_.grad.col(0) += g.start;
        end_.grad.col(0) += g.end;
        d_scores = std::move(g.emissions);
    } else {
        LossAndGrad lg = weighted_cross_entropy_mean(s, gold, class_weights);
        loss_value = lg.loss;
        d_scores = std::move(lg.grad);
    }
    encoder_.backward(cache, head_.backward(reps, d_scores));
    return loss_value;
}

std::vector<int> EmotionModel::predict_indices(const Matrix& features) const
{
    const Matrix s = scores(features);
    if (!uses_crf()) {
        return row_argmax(s);
    }
    if (config_.decode == CrfDecode::marginal) {
        return crf::marginal_decode(s, crf_params());
    }
    return crf::viterbi(s, crf_params()).labels;
}

std::vector<Emotion> EmotionModel::predict(const Matrix& features) const
{
    std::vector<Emotion> out;
    for (int k : predict_indices(features)) {
        out.push_back(emotion_from_index(k));
    }
    return out;
}

ParameterList EmotionModel::parameters()
{
    ParameterList out = encoder_.parameters();
    out.push_back(&head_.weight);
    out.push_back(&head_.bias);
    if (uses_crf()) {
        out.push_back(&transitions_);
        out.push_back(&start_);
        out.push_back(&end_);
    }
    return out;
}

Checkpoint EmotionModel::to_checkpoint() const
{
    Checkpoint ckpt;
    ckpt.config = {{"stage", "emotion"}, {"fusion_order", std::string(kFusionOrder)}, {"model", config_.to_json()}};
    ckpt.store(const_cast<EmotionModel*>(this)->parameters());
    return ckpt;
}

EmotionModel EmotionModel::from_checkpoint(const Checkpoint& ckpt)
{
    require_stage(ckpt, "emotion");
    EmotionModel model(EmotionModelConfig::from_json(ckpt.config.at("model")));
    ckpt.restore(model.parameters());
    return model;
}

// ---------------------------------------------------------------------------
// CauseModel

nlohmann::json CauseModelConfig::to_json() const
{
    return {
        {"variant", std::string(variant_name(variant))},
        {"input_width", input_width},
        {"hidden", hidden},
        {"num_layers", num_layers},
        {"embedding_dropout", embedding_dropout},
        {"inter_layer_dropout", inter_layer_dropout},
        {"threshold", threshold},
    };
}

CauseModelConfig CauseModelConfig::from_json(const nlohmann::json& j)
{
    CauseModelConfig c;
    c.variant = parse_cause_variant(value_or<std::string>(j, "variant", "dense"));
    c.input_width = value_or<Index>(j, "input_width", 0);
    c.hidden = value_or<Index>(j, "hidden", c.hidden);
    c.num_layers = value_or<int>(j, "num_layers", c.num_layers);
    c.embedding_dropout = value_or<double>(j, "embedding_dropout", c.embedding_dropout);
    c.inter_layer_dropout = value_or<double>(j, "inter_layer_dropout", c.inter_layer_dropout);
    c.threshold = value_or<double>(j, "threshold", c.threshold);
    return c;
}

CauseModel::CauseModel(const CauseModelConfig& config)
    : config_(config),
      encoder_("cause.encoder",
               {config.variant == CauseVariant::dense ? EncoderKind::dense : EncoderKind::bilstm,
                config.input_width, config.hidden, config.num_layers, config.embedding_dropout,
                config.inter_layer_dropout}),
      head_("cause.head", encoder_.output_width(), 1)
{
}

void CauseModel::init(Rng& rng)
{
    encoder_.init(rng);
    head_.init(rng);
}

void CauseModel::check_width(const Matrix& features) const
{
    if (features.cols() != config_.input_width) {
        throw ShapeError("cause model expects feature width " + std::to_string(config_.input_width) +
                         ", got " + std::to_string(features.cols()));
    }
    if (features.rows() < 1) {
        throw ShapeError("cause model needs at least one utterance");
    }
}

Matrix CauseModel::logits(const Matrix& features, Rng* dropout_rng) const
{
    check_width(features);
    return head_.forward(encoder_.forward(features, dropout_rng, nullptr));
}

Matrix CauseModel::representations(const Matrix& features) const
{
    check_width(features);
    return encoder_.forward(features, nullptr, nullptr);
}

Vector CauseModel::probabilities(const Matrix& features) const
{
    return sigmoid(logits(features)).col(0);
}

double CauseModel::loss(const Matrix& logits, std::span<const int> gold) const
{
    return binary_cross_entropy_mean(logits, gold).loss;
}

double CauseModel::accumulate_gradients(const Matrix& features, std::span<const int> gold, Rng* dropout_rng)
{
    check_width(features);
    UtteranceEncoder::Cache cache;
    const Matrix reps = encoder_.forward(features, dropout_rng, &cache);
    const LossAndGrad lg = binary_cross_entropy_mean(head_.forward(reps), gold);
    encoder_.backward(cache, head_.backward(reps, lg.grad));
    return lg.loss;
}

std::vector<int> CauseModel::predict(const Matrix& features) const
{
    const Vector p = probabilities(features);
    std::vector<int> out(static_cast<std::size_t>(p.size()));
    for (Index i = 0; i < p.size(); ++i) {
        out[static_cast<std::size_t>(i)] = p(i) > config_.threshold ? 1 : 0;
    }
    return out;
}

ParameterList CauseModel::parameters()
{
    ParameterList out = encoder_.parameters();
    out.push_back(&head_.weight);
    out.push_back(&head_.bias);
    return out;
}

Checkpoint CauseModel::to_checkpoint() const
{
    Checkpoint ckpt;
    ckpt.config = {{"stage", "cause"}, {"fusion_order", std::string(kFusionOrder)}, {"model", config_.to_json()}};
    ckpt.store(const_cast<CauseModel*>(this)->parameters());
    return ckpt;
}

CauseModel CauseModel::from_checkpoint(const Checkpoint& ckpt)
{
    require_stage(ckpt, "cause");
    CauseModel model(CauseModelConfig::from_json(ckpt.config.at("model")));
    ckpt.restore(model.parameters());
    return model;
}

// ---------------------------------------------------------------------------
// PairingModel

nlohmann::json PairingModelConfig::to_json() const
{
    return {
        {"emotion_rep_width", emotion_rep_width},
        {"cause_rep_width", cause_rep_width},
        {"max_distance", max_distance},
        {"distance_dim", distance_dim},
        {"threshold", threshold},
    };
}

PairingModelConfig PairingModelConfig::from_json(const nlohmann::json& j)
{
    PairingModelConfig c;
    c.emotion_rep_width = value_or<Index>(j, "emotion_rep_width", 0);
    c.cause_rep_width = value_or<Index>(j, "cause_rep_width", 0);
    c.max_distance = value_or<int>(j, "max_distance", c.max_distance);
    c.distance_dim = value_or<Index>(j, "distance_dim", c.distance_dim);
    c.threshold = value_or<double>(j, "threshold", c.threshold);
    return c;
}

PairingModel::PairingModel(const PairingModelConfig& config)
    : distance_table("pairing.distance_table", 2 * config.max_distance + 1, config.distance_dim),
      config_(config),
      head_("pairing.head", config.input_width(), 1)
{
    if (config.emotion_rep_width < 1 || config.cause_rep_width < 1 || config.max_distance < 0 ||
        config.distance_dim < 1) {
        throw ShapeError("invalid pairing model dimensions");
    }
}

void PairingModel::init(Rng& rng)
{
    fill_normal(distance_table.value, 1.0, rng);
    head_.init(rng);
}

int PairingModel::distance_row(int distance) const
{
    return std::clamp(distance, -config_.max_distance, config_.max_distance) + config_.max_distance;
}

RowVector PairingModel::pair_representation(const RowVector& emotion_rep, const RowVector& cause_rep,
                                            int distance) const
{
    if (emotion_rep.size() != config_.emotion_rep_width || cause_rep.size() != config_.cause_rep_width) {
        throw ShapeError("pair representation: rep widths do not match the pairing model");
    }
    RowVector out(config_.input_width());
    out << emotion_rep, cause_rep, distance_table.value.row(distance_row(distance));
    return out;
}

void PairingModel::check_batch(const PairBatch& batch) const
{
    const auto n = static_cast<Index>(batch.distances.size());
    if (batch.emotion_reps.rows() != n || batch.cause_reps.rows() != n) {
        throw ShapeError("pair batch: row counts disagree");
    }
    if (batch.emotion_reps.cols() != config_.emotion_rep_width ||
        batch.cause_reps.cols() != config_.cause_rep_width) {
        throw ShapeError("pair batch: rep widths " + std::to_string(batch.emotion_reps.cols()) + "/" +
                         std::to_string(batch.cause_reps.cols()) + " do not match the pairing model (" +
                         std::to_string(config_.emotion_rep_width) + "/" +
                         std::to_string(config_.cause_rep_width) + ")");
    }
}

Matrix PairingModel::pair_inputs(const PairBatch& batch) const
{
    check_batch(batch);
    const auto n = static_cast<Index>(batch.distances.size());
    Matrix x(n, config_.input_width());
    x.leftCols(config_.emotion_rep_width) = batch.emotion_reps;
    x.middleCols(config_.emotion_rep_width, config_.cause_rep_width) = batch.cause_reps;
    for (Index i = 0; i < n; ++i) {
        x.row(i).tail(config_.distance_dim) =
            distance_table.value.row(distance_row(batch.distances[static_cast<std::size_t>(i)]));
    }
    return x;
}

Matrix PairingModel::logits(const PairBatch& batch) const
{
    return head_.forward(pair_inputs(batch));
}

Vector PairingModel::probabilities(const PairBatch& batch) const
{
    return sigmoid(logits(batch)).col(0);
}

double PairingModel::loss(const PairBatch& batch) const
{
    return binary_cross_entropy_mean(logits(batch), batch.labels).loss;
}

double PairingModel::accumulate_gradients(const PairBatch& batch)
{
    const Matrix x = pair_inputs(batch);
    const LossAndGrad lg = binary_cross_entropy_mean(head_.forward(x), batch.labels);
    const Matrix dx = head_.backward(x, lg.grad);
    for (Index i = 0; i < x.rows(); ++i) {
        distance_table.grad.row(distance_row(batch.distances[static_cast<std::size_t>(i)])) +=
            dx.row(i).tail(config_.distance_dim);
    }
    return lg.loss;
}

Checkpoint PairingModel::to_checkpoint() const
{
    Checkpoint ckpt;
    ckpt.config = {{"stage", "pairing"}, {"fusion_order", std::string(kFusionOrder)}, {"model", config_.to_json()}};
    ckpt.store(const_cast<PairingModel*>(this)->parameters());
    return ckpt;
}

PairingModel PairingModel::from_checkpoint(const Checkpoint& ckpt)
{
    require_stage(ckpt, "pairing");
    PairingModel model(PairingModelConfig::from_json(ckpt.config.at("model")));
    ckpt.restore(model.parameters());
    return model;
}

} // namespace ecpe
