#include "ecpe/pipeline.hpp"

#include "ecpe/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <unordered_map>

namespace ecpe {

// ---------------------------------------------------------------------------
// Stage data

std::vector<StageExample> emotion_examples(const Dataset& dataset, const EmbeddingProvider& provider)
{
    std::vector<StageExample> out;
    out.reserve(dataset.conversations.size());
    for (const auto& conv : dataset.conversations) {
        out.push_back({conv.conversation_id, provider.features(conv), emotion_labels(conv)});
    }
    return out;
}

std::vector<StageExample> cause_examples(const Dataset& dataset, const EmbeddingProvider& provider)
{
    std::vector<StageExample> out;
    out.reserve(dataset.conversations.size());
    for (const auto& conv : dataset.conversations) {
        out.push_back({conv.conversation_id, provider.features(conv), derive_cause_labels(conv)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pair sampling

namespace {

std::set<UtterancePair> gold_pair_set(std::span<const EmotionCausePair> gold)
{
    std::set<UtterancePair> s;
    for (const auto& p : gold) {
        s.emplace(p.emotion_utterance_id, p.cause_utterance_id);
    }
    return s;
}

std::span<const EmotionCausePair> pairs_of(const Conversation& conv)
{
    if (!conv.gold_pairs) {
        throw ValidationError("conversation " + std::to_string(conv.conversation_id) +
                              ": pairing needs gold pairs");
    }
    return *conv.gold_pairs;
}

} // namespace

std::vector<UtterancePair> negative_candidate_space(const Conversation& conversation,
                                                    std::span<const int> emotion_utterance_ids)
{
    const auto gold = gold_pair_set(pairs_of(conversation));
    std::vector<UtterancePair> space;
    for (int e : emotion_utterance_ids) {
        for (int c = 1; c <= conversation.size(); ++c) {
            if (!gold.contains({e, c})) {
                space.emplace_back(e, c);
            }
        }
    }
    return space;
}

std::vector<PairExample> sample_negative_pairs(int conversation_id,
                                               std::span<const EmotionCausePair> gold_pairs,
                                               std::span<const UtterancePair> candidate_space, int ratio,
                                               std::uint64_t seed)
{
    if (ratio < 1) {
        throw ValidationError("negative ratio must be at least 1");
    }
    const auto gold = gold_pair_set(gold_pairs);
    std::vector<UtterancePair> space;
    space.reserve(candidate_space.size());
    for (const auto& p : candidate_space) {
        if (!gold.contains(p)) {
            space.push_back(p);
        }
    }
    std::sort(space.begin(), space.end());
    space.erase(std::unique(space.begin(), space.end()), space.end());

    const std::size_t wanted = std::min(static_cast<std::size_t>(ratio) * gold.size(), space.size());
    std::vector<UtterancePair> picked;
    picked.reserve(wanted);
    Rng rng = derive_rng(seed, {static_cast<std::uint64_t>(conversation_id), 0x4E47});
    std::sample(space.begin(), space.end(), std::back_inserter(picked), wanted, rng);

    std::vector<PairExample> out;
    out.reserve(picked.size());
    for (const auto& [e, c] : picked) {
        out.push_back({conversation_id, e, c, 0});
    }
    return out;
}

std::vector<PairExample> training_pairs(const Conversation& conversation, int ratio, std::uint64_t seed)
{
    const auto gold = pairs_of(conversation);
    std::vector<int> emotion_ids;
    for (const auto& u : conversation.utterances) {
        if (u.gold_emotion && *u.gold_emotion != Emotion::neutral) {
            emotion_ids.push_back(u.utterance_id);
        }
    }
    std::vector<PairExample> out;
    for (const auto& [e, c] : gold_pair_set(gold)) {
        out.push_back({conversation.conversation_id, e, c, 1});
    }
    const auto space = negative_candidate_space(conversation, emotion_ids);
    for (auto& neg : sample_negative_pairs(conversation.conversation_id, gold, space, ratio, seed)) {
        out.push_back(neg);
    }
    return out;
}

std::vector<ConversationReps> compute_representations(const EmotionModel& emotion, const CauseModel& cause,
                                                      const Dataset& dataset,
                                                      const EmbeddingProvider& provider)
{
    std::vector<ConversationReps> out;
    out.reserve(dataset.conversations.size());
    for (const auto& conv : dataset.conversations) {
        const Matrix x = provider.features(conv);
        out.push_back({conv.conversation_id, emotion.representations(x), cause.representations(x)});
    }
    return out;
}

PairBatch make_pair_batch(std::span<const PairExample> examples,
                          const std::function<const ConversationReps&(int)>& reps_by_id)
{
    PairBatch batch;
    if (examples.empty()) {
        return batch;
    }
    const ConversationReps& first = reps_by_id(examples.front().conversation_id);
    const auto n = static_cast<Index>(examples.size());
    batch.emotion_reps.resize(n, first.emotion.cols());
    batch.cause_reps.resize(n, first.cause.cols());
    batch.distances.reserve(examples.size());
    batch.labels.reserve(examples.size());
    for (Index i = 0; i < n; ++i) {
        const PairExample& ex = examples[static_cast<std::size_t>(i)];
        const ConversationReps& reps = reps_by_id(ex.conversation_id);
        batch.emotion_reps.row(i) = reps.emotion.row(ex.emotion_utterance_id - 1);
        batch.cause_reps.row(i) = reps.cause.row(ex.cause_utterance_id - 1);
        batch.distances.push_back(ex.cause_utterance_id - ex.emotion_utterance_id);
        batch.labels.push_back(ex.label);
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Training loop

Trainer::Trainer(StageTask task, const TrainOptions& options)
    : task_(std::move(task)), options_(options), optimizer_(options.optimizer)
{
    if (options.epochs < 1) {
        throw ValidationError("epochs must be at least 1");
    }
    if (task_.batches_per_epoch < 1) {
        throw ValidationError("training set yields no batches");
    }
    schedule_ = WarmupSchedule::from_fraction(
        static_cast<std::int64_t>(options.epochs) * task_.batches_per_epoch, options.warmup_fraction,
        options.optimizer.lr);
}

EpochReport Trainer::run_epoch()
{
    ++epoch_;
    const auto epoch = static_cast<std::uint64_t>(epoch_);
    if (task_.begin_epoch) {
        task_.begin_epoch(epoch_);
    }

    EpochReport report;
    report.epoch = epoch_;
    double total = 0.0;
    for (int b = 0; b < task_.batches_per_epoch; ++b) {
        zero_grads(task_.params);
        Rng dropout_rng = derive_rng(options_.seed, {epoch, static_cast<std::uint64_t>(b), 0xD0});
        const double loss = task_.run_batch(b, dropout_rng);
        if (!std::isfinite(loss)) {
            throw NumericError("non-finite loss at epoch " + std::to_string(epoch_) + ", step " +
                               std::to_string(optimizer_.step_count()) + ", batch " + std::to_string(b));
        }
        report.lr = schedule_.lr_at(optimizer_.step_count());
        try {
            optimizer_.step(task_.params, report.lr);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch_) + ", step " +
                               std::to_string(optimizer_.step_count()));
        }
        total += loss;
    }
    report.step = optimizer_.step_count();
    report.train_loss = total / task_.batches_per_epoch;
    if (task_.validate) {
        report.val = task_.validate();
        report.has_val = true;
    }
    return report;
}

void Trainer::save_state(Checkpoint& ckpt) const
{
    ckpt.config["trainer"] = {{"epoch", epoch_}, {"step", optimizer_.step_count()}};
    const auto& m = optimizer_.first_moments();
    const auto& v = optimizer_.second_moments();
    for (std::size_t i = 0; i < m.size(); ++i) {
        ckpt.add("adamw.m." + task_.params[i]->name, m[i]);
        ckpt.add("adamw.v." + task_.params[i]->name, v[i]);
    }
}

void Trainer::restore_state(const Checkpoint& ckpt)
{
    ckpt.restore(task_.params);
    auto it = ckpt.config.find("trainer");
    if (it == ckpt.config.end()) {
        throw LoadError("checkpoint carries no trainer state");
    }
    epoch_ = it->at("epoch").get<int>();
    optimizer_.set_step_count(it->at("step").get<std::int64_t>());
    auto& m = optimizer_.first_moments();
    auto& v = optimizer_.second_moments();
    m.clear();
    v.clear();
    if (optimizer_.step_count() == 0) {
        return;
    }
    for (const Parameter* p : task_.params) {
        m.push_back(ckpt.at("adamw.m." + p->name));
        v.push_back(ckpt.at("adamw.v." + p->name));
    }
}

// ---------------------------------------------------------------------------
// Stage tasks

namespace {

struct RowRef {
    std::size_t example = 0;
    Index row = 0;
};

std::vector<RowRef> all_rows(const std::vector<StageExample>& examples)
{
    std::vector<RowRef> rows;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        for (Index r = 0; r < examples[i].features.rows(); ++r) {
            rows.push_back({i, r});
        }
    }
    return rows;
}

// Shared batching for the two utterance-level stages: either fixed-size
// batches of utterances pooled across conversations, or one conversation per
// batch.
struct UtteranceBatches {
    std::vector<StageExample> train;
    bool per_conversation = false;
    int batch_size = 64;
    std::vector<RowRef> rows;
    std::vector<std::size_t> order;

    int count() const
    {
        if (per_conversation) {
            return static_cast<int>(train.size());
        }
        return static_cast<int>((rows.size() + static_cast<std::size_t>(batch_size) - 1) /
                                static_cast<std::size_t>(batch_size));
    }

    void shuffle(std::uint64_t seed, int epoch)
    {
        order.resize(per_conversation ? train.size() : rows.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = derive_rng(seed, {static_cast<std::uint64_t>(epoch), 0xB47C});
        std::shuffle(order.begin(), order.end(), rng);
    }

    // Features and labels for batch b.
    std::pair<Matrix, std::vector<int>> get(int b) const
    {
        if (per_conversation) {
            const auto& ex = train[order[static_cast<std::size_t>(b)]];
            return {ex.features, ex.labels};
        }
        const std::size_t begin = static_cast<std::size_t>(b) * static_cast<std::size_t>(batch_size);
        const std::size_t end = std::min(rows.size(), begin + static_cast<std::size_t>(batch_size));
        Matrix x(static_cast<Index>(end - begin), train.front().features.cols());
        std::vector<int> y;
        y.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            const RowRef& r = rows[order[i]];
            x.row(static_cast<Index>(i - begin)) = train[r.example].features.row(r.row);
            y.push_back(train[r.example].labels[static_cast<std::size_t>(r.row)]);
        }
        return {std::move(x), std::move(y)};
    }
};

std::shared_ptr<UtteranceBatches> make_batches(std::vector<StageExample> train, bool per_conversation,
                                               int batch_size)
{
    if (train.empty()) {
        throw ValidationError("training set is empty");
    }
    if (batch_size < 1) {
        throw ValidationError("batch size must be at least 1");
    }
    auto b = std::make_shared<UtteranceBatches>();
    b->train = std::move(train);
    b->per_conversation = per_conversation;
    b->batch_size = batch_size;
    if (!per_conversation) {
        b->rows = all_rows(b->train);
    }
    return b;
}

template <typename PredictFn>
eval::StageMetrics evaluate_examples(const std::vector<StageExample>& val, int n_classes, PredictFn predict)
{
    std::vector<int> pred;
    std::vector<int> gold;
    for (const auto& ex : val) {
        const auto p = predict(ex.features);
        pred.insert(pred.end(), p.begin(), p.end());
        gold.insert(gold.end(), ex.labels.begin(), ex.labels.end());
    }
    return eval::stage_metrics(pred, gold, n_classes);
}

} // namespace

StageTask emotion_task(EmotionModel& model, std::vector<StageExample> train, std::vector<StageExample> val,
                       Vector class_weights, const TrainOptions& options)
{
    const bool per_conversation = model.config().variant != EmotionVariant::dense;
    auto batches = make_batches(std::move(train), per_conversation, options.batch_size);
    auto weights = std::make_shared<Vector>(std::move(class_weights));

    StageTask task;
    task.params = model.parameters();
    task.batches_per_epoch = batches->count();
    task.begin_epoch = [batches, seed = options.seed](int epoch) { batches->shuffle(seed, epoch); };
    task.run_batch = [batches, weights, &model](int b, Rng& rng) {
        auto [x, y] = batches->get(b);
        return model.accumulate_gradients(x, y, *weights, &rng);
    };
    if (!val.empty()) {
        auto held = std::make_shared<std::vector<StageExample>>(std::move(val));
        task.validate = [held, &model] {
            return evaluate_examples(*held, kNumEmotions,
                                     [&model](const Matrix& x) { return model.predict_indices(x); });
        };
    }
    return task;
}

StageTask cause_task(CauseModel& model, std::vector<StageExample> train, std::vector<StageExample> val,
                     const TrainOptions& options)
{
    const bool per_conversation = model.config().variant != CauseVariant::dense;
    auto batches = make_batches(std::move(train), per_conversation, options.batch_size);

    StageTask task;
    task.params = model.parameters();
    task.batches_per_epoch = batches->count();
    task.begin_epoch = [batches, seed = options.seed](int epoch) { batches->shuffle(seed, epoch); };
    task.run_batch = [batches, &model](int b, Rng& rng) {
        auto [x, y] = batches->get(b);
        return model.accumulate_gradients(x, y, &rng);
    };
    if (!val.empty()) {
        auto held = std::make_shared<std::vector<StageExample>>(std::move(val));
        task.validate = [held, &model] {
            return evaluate_examples(*held, 2, [&model](const Matrix& x) { return model.predict(x); });
        };
    }
    return task;
}

namespace {

struct PairData {
    Dataset conversations;
    std::unordered_map<int, ConversationReps> reps;
    std::vector<PairExample> examples;

    const ConversationReps& lookup(int id) const
    {
        auto it = reps.find(id);
        if (it == reps.end()) {
            throw ValidationError("no representations for conversation " + std::to_string(id));
        }
        return it->second;
    }

    void resample(int ratio, std::uint64_t seed)
    {
        examples.clear();
        for (const auto& conv : conversations.conversations) {
            auto ex = training_pairs(conv, ratio, seed);
            examples.insert(examples.end(), ex.begin(), ex.end());
        }
    }
};

std::shared_ptr<PairData> make_pair_data(const Dataset& dataset, std::vector<ConversationReps> reps)
{
    auto d = std::make_shared<PairData>();
    d->conversations = dataset;
    for (auto& r : reps) {
        const int id = r.conversation_id;
        d->reps.emplace(id, std::move(r));
    }
    return d;
}

} // namespace

StageTask pairing_task(PairingModel& model, const Dataset& train, std::vector<ConversationReps> train_reps,
                       const Dataset& val, std::vector<ConversationReps> val_reps, const TrainOptions& options)
{
    if (options.batch_size < 1) {
        throw ValidationError("batch size must be at least 1");
    }
    auto data = make_pair_data(train, std::move(train_reps));
    // The per-epoch count does not depend on the seed.
    data->resample(options.negative_ratio, options.seed);
    const auto batch_size = static_cast<std::size_t>(options.batch_size);

    StageTask task;
    task.params = model.parameters();
    task.batches_per_epoch = static_cast<int>((data->examples.size() + batch_size - 1) / batch_size);
    task.begin_epoch = [data, options](int epoch) {
        const std::uint64_t epoch_seed =
            derive_rng(options.seed, {static_cast<std::uint64_t>(epoch), 0x5A})();
        data->resample(options.negative_ratio, epoch_seed);
        Rng rng = derive_rng(options.seed, {static_cast<std::uint64_t>(epoch), 0xB47C});
        std::shuffle(data->examples.begin(), data->examples.end(), rng);
    };
    task.run_batch = [data, batch_size, &model](int b, Rng&) {
        const std::size_t begin = static_cast<std::size_t>(b) * batch_size;
        const std::size_t end = std::min(data->examples.size(), begin + batch_size);
        const std::span<const PairExample> slice(data->examples.data() + begin, end - begin);
        return model.accumulate_gradients(
            make_pair_batch(slice, [&data](int id) -> const ConversationReps& { return data->lookup(id); }));
    };
    if (!val.conversations.empty()) {
        auto held = make_pair_data(val, std::move(val_reps));
        held->resample(options.negative_ratio, options.seed);
        task.validate = [held, &model] {
            if (held->examples.empty()) {
                return eval::stage_metrics(std::vector<int>{}, std::vector<int>{}, 2);
            }
            const PairBatch batch = make_pair_batch(
                held->examples, [&held](int id) -> const ConversationReps& { return held->lookup(id); });
            const Vector p = model.probabilities(batch);
            std::vector<int> pred(static_cast<std::size_t>(p.size()));
            for (Index i = 0; i < p.size(); ++i) {
                pred[static_cast<std::size_t>(i)] = p(i) > model.config().threshold ? 1 : 0;
            }
            return eval::stage_metrics(pred, batch.labels, 2);
        };
    }
    return task;
}

// ---------------------------------------------------------------------------
// Inference

void check_compatible(const EmotionModel& emotion, const CauseModel& cause, const PairingModel& pairing)
{
    if (emotion.config().input_width != cause.config().input_width) {
        throw ShapeError("emotion and cause checkpoints expect different feature widths (" +
                         std::to_string(emotion.config().input_width) + " vs " +
                         std::to_string(cause.config().input_width) + ")");
    }
    if (pairing.config().emotion_rep_width != emotion.representation_width() ||
        pairing.config().cause_rep_width != cause.representation_width()) {
        throw ShapeError("pairing checkpoint expects rep widths " +
                         std::to_string(pairing.config().emotion_rep_width) + "/" +
                         std::to_string(pairing.config().cause_rep_width) + ", stage models produce " +
                         std::to_string(emotion.representation_width()) + "/" +
                         std::to_string(cause.representation_width()));
    }
}

std::vector<EmotionCausePair> predict_pairs(const EmotionModel& emotion, const CauseModel& cause,
                                            const PairingModel& pairing, const Matrix& features)
{
    check_compatible(emotion, cause, pairing);
    const std::vector<int> emotions = emotion.predict_indices(features);
    const std::vector<int> causes = cause.predict(features);
    const Matrix emotion_reps = emotion.representations(features);
    const Matrix cause_reps = cause.representations(features);

    std::vector<UtterancePair> candidates;
    for (std::size_t u = 0; u < emotions.size(); ++u) {
        if (emotions[u] == emotion_index(Emotion::neutral)) {
            continue;
        }
        for (std::size_t c = 0; c < causes.size(); ++c) {
            if (causes[c] == 1) {
                candidates.emplace_back(static_cast<int>(u) + 1, static_cast<int>(c) + 1);
            }
        }
    }
    if (candidates.empty()) {
        return {};
    }

    PairBatch batch;
    const auto n = static_cast<Index>(candidates.size());
    batch.emotion_reps.resize(n, emotion_reps.cols());
    batch.cause_reps.resize(n, cause_reps.cols());
    for (Index i = 0; i < n; ++i) {
        const auto [e, c] = candidates[static_cast<std::size_t>(i)];
        batch.emotion_reps.row(i) = emotion_reps.row(e - 1);
        batch.cause_reps.row(i) = cause_reps.row(c - 1);
        batch.distances.push_back(c - e);
    }
    const Vector p = pairing.probabilities(batch);

    std::vector<EmotionCausePair> out;
    for (Index i = 0; i < n; ++i) {
        if (p(i) > pairing.config().threshold) {
            const auto [e, c] = candidates[static_cast<std::size_t>(i)];
            out.push_back({e, emotion_from_index(emotions[static_cast<std::size_t>(e - 1)]), c});
        }
    }
    return out;
}

Dataset predict_dataset(const EmotionModel& emotion, const CauseModel& cause, const PairingModel& pairing,
                        const Dataset& input, const EmbeddingProvider& provider)
{
    check_compatible(emotion, cause, pairing);
    if (!input.conversations.empty() && provider.width() != emotion.config().input_width) {
        throw ShapeError("embedding width " + std::to_string(provider.width()) +
                         " does not match the checkpoints (" + std::to_string(emotion.config().input_width) +
                         ")");
    }
    Dataset out = input;
    for (auto& conv : out.conversations) {
        const Matrix x = provider.features(conv);
        const auto emotions = emotion.predict(x);
        for (std::size_t i = 0; i < conv.utterances.size(); ++i) {
            conv.utterances[i].gold_emotion = emotions[i];
        }
        conv.gold_pairs = predict_pairs(emotion, cause, pairing, x);
    }
    return out;
}

} // namespace ecpe
