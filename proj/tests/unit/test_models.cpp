#include "ecpe/error.hpp"
#include "ecpe/gradcheck.hpp"
#include "ecpe/losses.hpp"
#include "ecpe/models.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ecpe;

namespace {

Matrix random_matrix(Index r, Index c, std::uint64_t seed)
{
    Rng rng(seed);
    Matrix m(r, c);
    fill_normal(m, 1.0, rng);
    return m;
}

EmotionModel make_emotion(EmotionVariant v, Index width = 6, Index hidden = 5, int layers = 2,
                          std::uint64_t seed = 1)
{
    EmotionModelConfig c;
    c.variant = v;
    c.input_width = width;
    c.hidden = hidden;
    c.num_layers = layers;
    EmotionModel m(c);
    Rng rng(seed);
    m.init(rng);
    return m;
}

CauseModel make_cause(CauseVariant v, Index width = 6, Index hidden = 5, int layers = 2)
{
    CauseModelConfig c;
    c.variant = v;
    c.input_width = width;
    c.hidden = hidden;
    c.num_layers = layers;
    CauseModel m(c);
    Rng rng(2);
    m.init(rng);
    return m;
}

void set_all(const ParameterList& params, double value)
{
    for (Parameter* p : params) p->value.setConstant(value);
}

const std::vector<EmotionVariant> kVariants = {EmotionVariant::dense, EmotionVariant::bilstm,
                                               EmotionVariant::bilstm_crf};

} // namespace

TEST(EmotionModelTest, DenseIsPermutationEquivariant)
{
    auto m = make_emotion(EmotionVariant::dense);
    const Matrix x = random_matrix(5, 6, 3);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
    perm.indices() << 3, 0, 4, 1, 2;
    const Matrix a = perm * m.scores(x);
    const Matrix b = m.scores(perm * x);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(EmotionModelTest, BilstmPropagatesContext)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto m = make_emotion(EmotionVariant::bilstm, 6, 5, 2, seed);
        const Matrix x = random_matrix(6, 6, 100 + seed);
        Matrix xp = x;
        xp.row(0).array() += 1.0;
        EXPECT_GT((m.scores(x).row(5) - m.scores(xp).row(5)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(EmotionModelTest, SingleUtteranceAllVariants)
{
    const Matrix x = random_matrix(1, 6, 4);
    for (auto v : kVariants) {
        auto m = make_emotion(v);
        EXPECT_EQ(m.scores(x).rows(), 1);
        EXPECT_EQ(m.predict(x).size(), 1u);
        EXPECT_EQ(m.representations(x).rows(), 1);
    }
}

TEST(EmotionModelTest, UnitWeightsGiveMeanCrossEntropy)
{
    auto m = make_emotion(EmotionVariant::dense);
    const Matrix s = m.scores(random_matrix(4, 6, 5));
    const std::vector<int> y{1, 4, 4, 6};
    double mean = 0.0;
    for (int i = 0; i < 4; ++i) mean += cross_entropy(s.row(i), y[i]);
    EXPECT_NEAR(m.loss(s, y, Vector::Ones(7)), mean / 4.0, 1e-15);
}

TEST(EmotionModelTest, CrfZeroParamsUniform)
{
    auto m = make_emotion(EmotionVariant::bilstm_crf);
    set_all(m.parameters(), 0.0);
    const Matrix x = random_matrix(3, 6, 6);
    const std::vector<int> y{0, 4, 2};
    EXPECT_NEAR(m.loss(m.scores(x), y, Vector::Ones(7)), 3.0 * std::log(7.0), 1e-12);
}

TEST(EmotionModelTest, OneHotPlantRecovered)
{
    EmotionModelConfig c;
    c.variant = EmotionVariant::dense;
    c.input_width = 7;
    c.hidden = 7;
    EmotionModel m(c);
    set_all(m.parameters(), 0.0);
    m.encoder().parameters()[0]->value = 10.0 * Matrix::Identity(7, 7);
    m.head().weight.value.setIdentity();
    Matrix x = Matrix::Zero(7, 7);
    const std::vector<int> labels{4, 0, 6, 3, 3, 1, 5};
    for (int i = 0; i < 7; ++i) x(i, labels[i]) = 1.0;
    EXPECT_EQ(m.predict_indices(x), labels);
}

TEST(EmotionModelTest, ForbiddenSelfTransitions)
{
    auto m = make_emotion(EmotionVariant::bilstm_crf);
    m.crf_transitions().value.diagonal().setConstant(-1e9);
    const Matrix x = random_matrix(9, 6, 7);
    const auto y = m.predict_indices(x);
    for (std::size_t t = 1; t < y.size(); ++t) EXPECT_NE(y[t], y[t - 1]);
}

TEST(EmotionModelTest, RepeatedCallsIdentical)
{
    const Matrix x = random_matrix(5, 6, 8);
    for (auto v : kVariants) {
        const auto m = make_emotion(v);
        EXPECT_EQ(m.scores(x), m.scores(x));
        EXPECT_EQ(m.predict_indices(x), m.predict_indices(x));
    }
}

TEST(EmotionModelTest, WidthMismatch)
{
    const auto m = make_emotion(EmotionVariant::bilstm);
    EXPECT_THROW(m.scores(Matrix::Zero(3, 5)), ShapeError);
}

TEST(EmotionModelTest, GradcheckAllVariants)
{
    const Matrix x = random_matrix(5, 6, 9);
    const std::vector<int> y{0, 3, 3, 6, 4};
    Vector w(7);
    w << 1.2, 0.4, 2.0, 0.9, 0.3, 1.7, 1.0;
    for (auto v : kVariants) {
        auto m = make_emotion(v, 6, 4, 2);
        if (m.uses_crf()) {
            Rng rng(11);
            fill_normal(m.crf_transitions().value, 0.5, rng);
        }
        const auto r = gradcheck([&] { return m.accumulate_gradients(x, y, w, nullptr); }, m.parameters());
        EXPECT_LT(r.max_relative_error, 1e-4) << variant_name(v) << " " << r.worst_parameter << "[" << r.worst_index << "] " << r.analytic << " vs " << r.numeric;
    }
}

TEST(EmotionModelTest, GradcheckFourLayerStack)
{
    auto m = make_emotion(EmotionVariant::bilstm, 6, 8, 4);
    const Matrix x = random_matrix(6, 6, 10);
    const std::vector<int> y{0, 1, 2, 3, 4, 5};
    const auto r =
        gradcheck([&] { return m.accumulate_gradients(x, y, Vector::Ones(7), nullptr); }, m.parameters());
    EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter << "[" << r.worst_index << "] " << r.analytic << " vs " << r.numeric;
}

TEST(EmotionModelTest, CheckpointRoundTrip)
{
    const Matrix x = random_matrix(5, 6, 12);
    for (auto v : kVariants) {
        const auto m = make_emotion(v);
        const auto back = EmotionModel::from_checkpoint(m.to_checkpoint());
        EXPECT_EQ(back.scores(x), m.scores(x));
        EXPECT_EQ(back.config().to_json(), m.config().to_json());
    }
    const auto cause = make_cause(CauseVariant::dense);
    EXPECT_THROW(EmotionModel::from_checkpoint(cause.to_checkpoint()), LoadError);
}

TEST(CauseModelTest, ZeroLogitIsNotCause)
{
    auto m = make_cause(CauseVariant::dense);
    set_all(m.parameters(), 0.0);
    const Matrix x = random_matrix(4, 6, 13);
    EXPECT_LT((m.probabilities(x).array() - 0.5).abs().maxCoeff(), 1e-15);
    EXPECT_EQ(m.predict(x), std::vector<int>(4, 0));
}

TEST(CauseModelTest, DenseIsPermutationEquivariant)
{
    const auto m = make_cause(CauseVariant::dense);
    const Matrix x = random_matrix(4, 6, 14);
    const Matrix xr = x.colwise().reverse();
    const Matrix a = m.logits(x).colwise().reverse();
    EXPECT_LT((a - m.logits(xr)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CauseModelTest, Gradcheck)
{
    const Matrix x = random_matrix(5, 6, 15);
    const std::vector<int> y{0, 1, 1, 0, 1};
    for (auto v : {CauseVariant::dense, CauseVariant::bilstm}) {
        auto m = make_cause(v, 6, 4, 2);
        const auto r = gradcheck([&] { return m.accumulate_gradients(x, y, nullptr); }, m.parameters());
        EXPECT_LT(r.max_relative_error, 1e-4) << variant_name(v) << " " << r.worst_parameter << "[" << r.worst_index << "] " << r.analytic << " vs " << r.numeric;
    }
}

TEST(CauseModelTest, CheckpointRoundTrip)
{
    const auto m = make_cause(CauseVariant::bilstm);
    const Matrix x = random_matrix(5, 6, 16);
    EXPECT_EQ(CauseModel::from_checkpoint(m.to_checkpoint()).logits(x), m.logits(x));
}

namespace {

PairingModel make_pairing(Index re = 3, Index rc = 4, int dmax = 2, Index ddist = 3)
{
    PairingModel m({re, rc, dmax, ddist, 0.5});
    Rng rng(17);
    m.init(rng);
    return m;
}

PairBatch random_batch(Index n, Index re, Index rc, std::uint64_t seed)
{
    PairBatch b;
    b.emotion_reps = random_matrix(n, re, seed);
    b.cause_reps = random_matrix(n, rc, seed + 1);
    for (Index i = 0; i < n; ++i) {
        b.distances.push_back(static_cast<int>(i % 9) - 4);
        b.labels.push_back(static_cast<int>(i % 3 == 0));
    }
    return b;
}

} // namespace

TEST(PairingModelTest, RepresentationLayout)
{
    const auto m = make_pairing();
    const RowVector e = RowVector::Constant(3, 1.0), c = RowVector::Constant(4, 2.0);
    const RowVector r = m.pair_representation(e, c, 0);
    EXPECT_EQ(r.size(), 3 + 4 + 3);
    EXPECT_EQ(r.tail(3), m.distance_table.value.row(2));
    EXPECT_EQ(r.head(3), e);
    EXPECT_EQ(r.segment(3, 4), c);
    EXPECT_EQ(m.pair_representation(e, c, 9).tail(3), m.distance_table.value.row(4));
    EXPECT_EQ(m.pair_representation(e, c, -9).tail(3), m.distance_table.value.row(0));
    EXPECT_EQ(m.distance_row(-1), 1);
    EXPECT_THROW(m.pair_representation(c, e, 0), ShapeError);
}

TEST(PairingModelTest, ZeroHeadIsHalf)
{
    auto m = make_pairing();
    m.head().weight.value.setZero();
    const auto b = random_batch(10, 3, 4, 18);
    EXPECT_LT((m.probabilities(b).array() - 0.5).abs().maxCoeff(), 1e-15);
}

TEST(PairingModelTest, Gradcheck)
{
    auto m = make_pairing();
    const auto b = random_batch(12, 3, 4, 19);
    const auto r = gradcheck([&] { return m.accumulate_gradients(b); }, m.parameters());
    EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter << "[" << r.worst_index << "] " << r.analytic << " vs " << r.numeric;
}

TEST(PairingModelTest, CheckpointRoundTrip)
{
    const auto m = make_pairing();
    const auto b = random_batch(6, 3, 4, 20);
    EXPECT_EQ(PairingModel::from_checkpoint(m.to_checkpoint()).logits(b), m.logits(b));
}

TEST(Variants, NamesRoundTrip)
{
    for (auto v : kVariants) EXPECT_EQ(parse_emotion_variant(variant_name(v)), v);
    EXPECT_EQ(parse_cause_variant("bilstm"), CauseVariant::bilstm);
    EXPECT_THROW(parse_emotion_variant("transformer"), Error);
}
