#include "ecpe/error.hpp"
#include "ecpe/pipeline.hpp"
#include "ecpe/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

using namespace ecpe;

namespace {

Dataset synthetic(int n, std::uint64_t seed)
{
    SyntheticCorpusOptions o;
    o.num_conversations = n;
    o.seed = seed;
    return synthesize_dataset(o);
}

Conversation conversation_with(int length, std::vector<EmotionCausePair> pairs)
{
    Conversation c;
    c.conversation_id = 1;
    for (int i = 1; i <= length; ++i) c.utterances.push_back({i, "S", "t", Emotion::neutral});
    for (const auto& p : pairs) c.utterances[static_cast<std::size_t>(p.emotion_utterance_id - 1)].gold_emotion = p.emotion;
    c.gold_pairs = std::move(pairs);
    return c;
}

} // namespace

TEST(NegativeSampling, RatioFiveWithRoom)
{
    const auto conv = conversation_with(6, {{3, Emotion::joy, 2}, {3, Emotion::joy, 3}});
    const std::vector<int> slots{3, 5};
    const auto space = negative_candidate_space(conv, slots);
    EXPECT_EQ(space.size(), 10u);
    const auto neg = sample_negative_pairs(1, *conv.gold_pairs, space, 5, 7);
    EXPECT_EQ(neg.size(), 10u);
}

TEST(NegativeSampling, ExhaustsSmallSpace)
{
    const auto conv = conversation_with(2, {{2, Emotion::joy, 2}, {2, Emotion::joy, 1}});
    const std::vector<UtterancePair> space{{1, 1}, {1, 2}, {2, 3}};
    const auto neg = sample_negative_pairs(1, *conv.gold_pairs, space, 5, 3);
    EXPECT_EQ(neg.size(), 3u);
}

TEST(NegativeSampling, SeededAndClean)
{
    const Dataset d = synthetic(40, 5);
    for (const auto& conv : d.conversations) {
        const auto a = training_pairs(conv, 5, 11);
        EXPECT_EQ(a, training_pairs(conv, 5, 11));
        std::set<std::pair<int, int>> gold;
        for (const auto& p : *conv.gold_pairs) gold.insert({p.emotion_utterance_id, p.cause_utterance_id});
        std::set<std::pair<int, int>> seen;
        for (const auto& ex : a) {
            EXPECT_TRUE(seen.insert({ex.emotion_utterance_id, ex.cause_utterance_id}).second);
            EXPECT_EQ(ex.label == 1, gold.contains({ex.emotion_utterance_id, ex.cause_utterance_id}));
        }
    }
    EXPECT_THROW(sample_negative_pairs(1, {}, {}, 0, 1), ValidationError);
}

TEST(PredictPairs, ThresholdingAndEmptyCases)
{
    // Three utterances with one-hot features; only utterance 1 is non-neutral,
    // utterances 2 and 3 are candidate causes.
    EmotionModelConfig ec;
    ec.variant = EmotionVariant::dense;
    ec.input_width = 3;
    ec.hidden = 3;
    EmotionModel emotion(ec);
    emotion.encoder().parameters()[0]->value = 5.0 * Matrix::Identity(3, 3);
    emotion.head().bias.value(0, emotion_index(Emotion::neutral)) = 0.5;
    emotion.head().weight.value(0, emotion_index(Emotion::joy)) = 10.0;

    CauseModelConfig cc;
    cc.variant = CauseVariant::dense;
    cc.input_width = 3;
    cc.hidden = 3;
    CauseModel cause(cc);
    cause.encoder().parameters()[0]->value = 5.0 * Matrix::Identity(3, 3);
    cause.head().weight.value << 0, 10, 10;
    cause.head().bias.value(0, 0) = -5.0;

    PairingModel pairing({3, 3, 4, 2, 0.5});
    pairing.head().weight.value(6, 0) = 1.0;
    pairing.distance_table.value(pairing.distance_row(1), 0) = std::log(0.9 / 0.1);
    pairing.distance_table.value(pairing.distance_row(2), 0) = std::log(0.2 / 0.8);

    const Matrix x = Matrix::Identity(3, 3);
    EXPECT_EQ(predict_pairs(emotion, cause, pairing, x),
              (std::vector<EmotionCausePair>{{1, Emotion::joy, 2}}));

    CauseModel no_causes = cause;
    no_causes.head().bias.value(0, 0) = -50.0;
    EXPECT_TRUE(predict_pairs(emotion, no_causes, pairing, x).empty());

    EmotionModel all_neutral = emotion;
    all_neutral.head().weight.value.setZero();
    EXPECT_TRUE(predict_pairs(all_neutral, cause, pairing, x).empty());

    PairingModel wrong({4, 3, 4, 2, 0.5});
    EXPECT_THROW(predict_pairs(emotion, cause, wrong, x), ShapeError);
}

TEST(Training, EmotionLossDecreases)
{
    const Dataset d = synthetic(5, 2);
    const auto provider = synthetic_provider(1, {8, 4, 4}, d, PlantedRule{});
    for (auto v : {EmotionVariant::dense, EmotionVariant::bilstm, EmotionVariant::bilstm_crf}) {
        EmotionModelConfig c;
        c.variant = v;
        c.input_width = 16;
        c.hidden = 16;
        c.num_layers = 1;
        EmotionModel m(c);
        Rng rng(3);
        m.init(rng);
        TrainOptions o;
        o.epochs = 13;
        o.optimizer.lr = 1e-2;
        o.batch_size = 16;
        Trainer t(emotion_task(m, emotion_examples(d, provider), {}, Vector::Ones(7), o), o);
        double first = 0.0, last = 0.0;
        while (t.epochs_done() < o.epochs) {
            const auto r = t.run_epoch();
            if (r.epoch == 1) first = r.train_loss;
            last = r.train_loss;
        }
        EXPECT_GE(t.total_steps(), 50);
        EXPECT_LT(last, first) << variant_name(v);
    }
}

TEST(Training, CauseFlagLearned)
{
    const Dataset d = synthetic(60, 3);
    const auto provider = synthetic_provider(2, {8, 4, 4}, d, PlantedRule{});
    const auto [train, val] = split_train_val(d, 0.2, 1);
    CauseModelConfig c;
    c.variant = CauseVariant::dense;
    c.input_width = 16;
    c.hidden = 16;
    c.embedding_dropout = 0.0;
    CauseModel m(c);
    Rng rng(4);
    m.init(rng);
    TrainOptions o;
    o.epochs = 10;
    o.optimizer.lr = 1e-2;
    o.batch_size = 16;
    Trainer t(cause_task(m, cause_examples(train, provider), cause_examples(val, provider), o), o);
    EpochReport r;
    while (t.epochs_done() < o.epochs) r = t.run_epoch();
    ASSERT_TRUE(r.has_val);
    EXPECT_GE(r.val.accuracy, 0.99);
}

TEST(Training, PairingLearnsDistanceRule)
{
    const Dataset d = synthetic(80, 4);
    std::vector<ConversationReps> reps;
    Rng rng(5);
    for (const auto& conv : d.conversations) {
        Matrix e(conv.size(), 4), c(conv.size(), 4);
        fill_normal(e, 1.0, rng);
        fill_normal(c, 1.0, rng);
        reps.push_back({conv.conversation_id, e, c});
    }
    PairingModel m({4, 4, 12, 8, 0.5});
    m.init(rng);
    TrainOptions o;
    o.epochs = 10;
    o.optimizer.lr = 2e-2;
    o.batch_size = 32;
    const auto [train, val] = split_train_val(d, 0.25, 2);
    auto reps_for = [&](const Dataset& part) {
        std::vector<ConversationReps> out;
        for (const auto& conv : part.conversations) {
            for (const auto& r : reps) {
                if (r.conversation_id == conv.conversation_id) out.push_back(r);
            }
        }
        return out;
    };
    Trainer t(pairing_task(m, train, reps_for(train), val, reps_for(val), o), o);
    EpochReport r;
    while (t.epochs_done() < o.epochs) r = t.run_epoch();
    EXPECT_GE(r.val.accuracy, 0.99);
}

TEST(Training, PairingInitialLossNearLn2)
{
    Rng rng(6);
    PairingModel m({16, 16, 12, 32, 0.5});
    m.init(rng);
    PairBatch b;
    b.emotion_reps.resize(400, 16);
    b.cause_reps.resize(400, 16);
    fill_uniform(b.emotion_reps, 1.0, rng);
    fill_uniform(b.cause_reps, 1.0, rng);
    for (int i = 0; i < 400; ++i) {
        b.distances.push_back(i % 25 - 12);
        b.labels.push_back(i % 2);
    }
    EXPECT_NEAR(m.loss(b), std::log(2.0), 0.15);
}

TEST(Training, ResumeReproducesNextEpoch)
{
    const Dataset d = synthetic(6, 7);
    const auto provider = synthetic_provider(1, {8, 2, 2}, d, PlantedRule{});
    EmotionModelConfig c;
    c.variant = EmotionVariant::bilstm;
    c.input_width = 12;
    c.hidden = 6;
    c.num_layers = 2;
    TrainOptions o;
    o.epochs = 3;
    o.seed = 9;

    EmotionModel a(c);
    Rng rng(1);
    a.init(rng);
    Trainer ta(emotion_task(a, emotion_examples(d, provider), {}, Vector::Ones(7), o), o);
    ta.run_epoch();
    Checkpoint saved = a.to_checkpoint();
    ta.save_state(saved);
    const double expected = ta.run_epoch().train_loss;

    EmotionModel b(c);
    Trainer tb(emotion_task(b, emotion_examples(d, provider), {}, Vector::Ones(7), o), o);
    tb.restore_state(saved);
    EXPECT_EQ(tb.epochs_done(), 1);
    EXPECT_EQ(tb.run_epoch().train_loss, expected);
}

TEST(Training, NonFiniteLossAborts)
{
    Parameter p("p", 1, 1);
    StageTask task;
    task.params = {&p};
    task.batches_per_epoch = 2;
    task.run_batch = [](int b, Rng&) { return b == 1 ? std::nan("") : 1.0; };
    TrainOptions o;
    o.epochs = 1;
    Trainer t(task, o);
    try {
        t.run_epoch();
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
    }
}

TEST(Inference, DeterministicDataset)
{
    const Dataset d = synthetic(4, 8);
    const auto provider = synthetic_provider(1, {8, 2, 2}, d, PlantedRule{});
    EmotionModelConfig ec;
    ec.variant = EmotionVariant::bilstm_crf;
    ec.input_width = 12;
    ec.hidden = 4;
    ec.num_layers = 1;
    CauseModelConfig cc;
    cc.input_width = 12;
    cc.hidden = 4;
    EmotionModel e(ec);
    CauseModel c(cc);
    Rng rng(2);
    e.init(rng);
    c.init(rng);
    PairingModel p({e.representation_width(), c.representation_width(), 12, 4, 0.5});
    p.init(rng);
    const Dataset a = predict_dataset(e, c, p, d, provider);
    EXPECT_EQ(a, predict_dataset(e, c, p, d, provider));
    for (const auto& conv : a.conversations) {
        const auto causes = c.predict(provider.features(conv));
        for (const auto& pair : *conv.gold_pairs) {
            EXPECT_NE(pair.emotion, Emotion::neutral);
            EXPECT_EQ(conv.utterances[static_cast<std::size_t>(pair.emotion_utterance_id - 1)].gold_emotion,
                      pair.emotion);
            EXPECT_EQ(causes[static_cast<std::size_t>(pair.cause_utterance_id - 1)], 1);
        }
    }
    EXPECT_TRUE(predict_dataset(e, c, p, Dataset{}, provider).conversations.empty());
}
