// Acceptance suite. Prints one [PASS]/[FAIL] line per criterion and exits
// nonzero when any criterion fails.

#include "oracles.hpp"

#include "ecpe/corpus.hpp"
#include "ecpe/crf.hpp"
#include "ecpe/gradcheck.hpp"
#include "ecpe/losses.hpp"
#include "ecpe/metrics.hpp"
#include "ecpe/models.hpp"
#include "ecpe/pipeline.hpp"
#include "ecpe/synthetic.hpp"

#ifdef ECPE_HAVE_COMMANDS
#include "ecpe_tools/commands.hpp"
#endif

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace ecpe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

class Detail {
public:
    template <typename T>
    Detail& add(const std::string& key, const T& value)
    {
        if (!first_) out_ << ", ";
        first_ = false;
        out_ << key << '=' << value;
        return *this;
    }
    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
    bool first_ = true;
};

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Matrix normal(Index r, Index c, Rng& rng, double scale = 1.0)
{
    Matrix m(r, c);
    fill_normal(m, scale, rng);
    return m;
}

fs::path scratch_dir(const std::string& name)
{
    const fs::path dir = fs::current_path() / "acceptance_work" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------
// 1. CRF against exhaustive enumeration

Outcome crf_oracle()
{
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(4242);
    int instances = 0, label_mismatches = 0;
    double worst_z = 0.0, worst_score = 0.0;
    for (int steps = 1; steps <= 4; ++steps) {
        for (int k = 2; k <= 3; ++k) {
            for (int rep = 0; rep < 30; ++rep, ++instances) {
                // Coarse integer scores in some instances force exact ties.
                oracle::CrfInstance c = oracle::random_crf(steps, k, rng, rep % 3 == 0 ? 1.0 : 2.0);
                if (rep % 5 == 4) {
                    c.emissions = c.emissions.array().round();
                    c.transitions = c.transitions.array().round();
                    c.start = c.start.array().round();
                    c.end = c.end.array().round();
                }
                const crf::CrfParams p{c.transitions, c.start, c.end};
                const auto ref = oracle::brute_argmax_backtrack(c);
                const auto got = crf::viterbi(c.emissions, p);
                worst_z = std::max(worst_z, std::abs(crf::log_partition(c.emissions, p) -
                                                     oracle::brute_log_partition(c)));
                worst_score = std::max(worst_score, std::abs(got.score - ref.score));
                label_mismatches += got.labels != ref.labels;
            }
        }
    }
    const double elapsed = seconds_since(start);
    const bool ok = instances >= 200 && worst_z <= 1e-8 && worst_score <= 1e-8 && label_mismatches == 0 &&
                    elapsed < 10.0;
    return {ok, Detail()
                    .add("instances", instances)
                    .add("max_logZ_err", worst_z)
                    .add("max_viterbi_score_err", worst_score)
                    .add("label_mismatches", label_mismatches)
                    .add("seconds", elapsed)
                    .str()};
}

// ---------------------------------------------------------------------------
// 2. Gradient checks

Outcome gradient_checks()
{
    const auto start = std::chrono::steady_clock::now();
    Rng rng(9001);
    Detail detail;
    bool ok = true;
    const auto record = [&](const std::string& name, const GradcheckResult& r, double tol) {
        ok = ok && r.max_relative_error < tol;
        detail.add(name, r.max_relative_error);
    };

    {
        Dense head("wce_head", 6, kNumEmotions);
        head.init(rng);
        const Matrix x = normal(8, 6, rng);
        const std::vector<int> y{4, 4, 3, 0, 6, 5, 1, 2};
        const Vector w = (normal(kNumEmotions, 1, rng).array().abs() + 0.1).matrix();
        record("wce_head", gradcheck([&] {
                   const auto lg = weighted_cross_entropy_mean(head.forward(x), y, w);
                   head.backward(x, lg.grad);
                   return lg.loss;
               }, head.parameters()),
               1e-4);
    }
    {
        Dense head("bce_head", 6, 1);
        head.init(rng);
        const Matrix x = normal(8, 6, rng);
        const std::vector<int> y{1, 0, 0, 1, 1, 0, 0, 0};
        record("bce_head", gradcheck([&] {
                   const auto lg = binary_cross_entropy_mean(head.forward(x), y);
                   head.backward(x, lg.grad);
                   return lg.loss;
               }, head.parameters()),
               1e-4);
    }
    {
        PairingModel m({6, 5, 4, 3, 0.5});
        m.init(rng);
        PairBatch b{normal(9, 6, rng), normal(9, 5, rng), {}, {}};
        for (int i = 0; i < 9; ++i) {
            b.distances.push_back(i - 6);
            b.labels.push_back(i % 3 == 0);
        }
        record("pairing_head", gradcheck([&] { return m.accumulate_gradients(b); }, m.parameters()), 1e-4);
    }
    {
        EmotionModelConfig c;
        c.variant = EmotionVariant::bilstm;
        c.input_width = 6;
        c.hidden = 8;
        c.num_layers = 4;
        EmotionModel m(c);
        m.init(rng);
        const Matrix x = normal(6, 6, rng);
        const std::vector<int> y{4, 3, 3, 0, 5, 4};
        const Vector w = (normal(kNumEmotions, 1, rng).array().abs() + 0.5).matrix();
        record("birnn_4_layer", gradcheck([&] { return m.accumulate_gradients(x, y, w, nullptr); },
                                         m.parameters()),
               1e-4);
    }
    {
        Parameter e("emissions", 5, 3), a("transitions", 3, 3), s("start", 3, 1), f("end", 3, 1);
        for (Parameter* p : {&e, &a, &s, &f}) fill_normal(p->value, 1.0, rng);
        const std::vector<int> y{2, 0, 0, 1, 2};
        record("crf", gradcheck([&] {
                   const crf::CrfParams p{a.value, s.value.col(0), f.value.col(0)};
                   const auto g = crf::gradients(e.value, p, y);
                   e.grad += g.emissions;
                   a.grad += g.transitions;
                   s.grad += g.start;
                   f.grad += g.end;
                   return crf::nll(e.value, p, y);
               }, {&e, &a, &s, &f}),
               1e-6);
    }
    const double elapsed = seconds_since(start);
    detail.add("seconds", elapsed);
    return {ok && elapsed < 60.0, detail.str()};
}

// ---------------------------------------------------------------------------
// 3. Metric fixtures and gold-vs-gold

bool all_ones(const nlohmann::json& section)
{
    for (const char* key : {"weighted_precision", "weighted_recall", "weighted_f1", "macro_f1"}) {
        if (!section.contains(key) || section[key].get<double>() != 1.0) return false;
    }
    return !section.contains("accuracy") || section["accuracy"].get<double>() == 1.0;
}

Outcome metric_fixtures()
{
    using eval::ScoredPair;
    bool ok = true;
    Detail detail;

    const std::vector<int> gold{0, 0, 1, 1}, pred{0, 1, 1, 1};
    const double stage_f1 = eval::stage_metrics(pred, gold, 2).weighted_f1;
    ok = ok && std::abs(stage_f1 - 11.0 / 15.0) < 1e-12;
    detail.add("stage_weighted_f1", stage_f1);

    const std::vector<ScoredPair> gold_pairs{{1, {3, Emotion::joy, 2}}, {1, {3, Emotion::joy, 3}},
                                             {1, {5, Emotion::anger, 5}}};
    const std::vector<ScoredPair> pred_pairs{{1, {3, Emotion::joy, 2}}, {1, {5, Emotion::anger, 4}}};
    const auto pm = eval::pair_metrics(pred_pairs, gold_pairs);
    ok = ok && std::abs(pm.weighted_f1 - 4.0 / 9.0) < 1e-12;
    detail.add("pair_weighted_f1", pm.weighted_f1);

    const auto sm = eval::stage_metrics(gold, gold, 2);
    const auto self_pairs = eval::pair_metrics(gold_pairs, gold_pairs);
    const bool stage_self = sm.weighted_f1 == 1.0 && sm.weighted_precision == 1.0 &&
                            sm.weighted_recall == 1.0 && sm.macro_f1 == 1.0 && sm.accuracy == 1.0;
    const bool pair_self = self_pairs.weighted_f1 == 1.0 && self_pairs.weighted_precision == 1.0 &&
                           self_pairs.weighted_recall == 1.0 && self_pairs.macro_f1 == 1.0;

    SyntheticCorpusOptions o;
    o.num_conversations = 30;
    o.seed = 12;
    const Dataset d = synthesize_dataset(o);
    const auto report = eval::score_datasets(d, d);
    const bool dataset_self =
        all_ones(report["emotion"]) && all_ones(report["candidate_cause"]) && all_ones(report["pairs"]);
    ok = ok && stage_self && pair_self && dataset_self;
    detail.add("gold_vs_gold", stage_self && pair_self && dataset_self ? "all 1.0" : "not all 1.0");
    return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 4. Negative sampling

Outcome negative_sampling()
{
    SyntheticCorpusOptions o;
    o.num_conversations = 100;
    o.seed = 31;
    const Dataset d = synthesize_dataset(o);
    int with_room = 0, exhausted = 0, count_errors = 0, gold_hits = 0, unstable = 0, label_errors = 0;
    for (const auto& conv : d.conversations) {
        std::set<std::pair<int, int>> gold;
        std::set<int> slots;
        for (const auto& p : *conv.gold_pairs) {
            gold.insert({p.emotion_utterance_id, p.cause_utterance_id});
            slots.insert(p.emotion_utterance_id);
        }
        // Candidate space by direct enumeration.
        std::size_t space = 0;
        for (int e : slots) {
            for (int c = 1; c <= static_cast<int>(conv.utterances.size()); ++c) space += !gold.count({e, c});
        }
        const auto sample = training_pairs(conv, 5, 777);
        std::size_t positives = 0, negatives = 0;
        for (const auto& ex : sample) {
            if (ex.label == 1) {
                ++positives;
                label_errors += !gold.count({ex.emotion_utterance_id, ex.cause_utterance_id});
            } else {
                ++negatives;
                gold_hits += gold.count({ex.emotion_utterance_id, ex.cause_utterance_id}) > 0;
                label_errors += !slots.count(ex.emotion_utterance_id);
            }
        }
        label_errors += positives != gold.size();
        const std::size_t wanted = std::min(5 * positives, space);
        count_errors += negatives != wanted;
        (5 * positives <= space ? with_room : exhausted) += 1;
        unstable += sample != training_pairs(conv, 5, 777);
    }
    const bool ok = count_errors == 0 && gold_hits == 0 && unstable == 0 && label_errors == 0;
    return {ok, Detail()
                    .add("conversations", d.conversations.size())
                    .add("exact_1to5", with_room)
                    .add("space_exhausted", exhausted)
                    .add("count_errors", count_errors)
                    .add("gold_sampled_as_negative", gold_hits)
                    .add("irreproducible", unstable)
                    .str()};
}

// ---------------------------------------------------------------------------
// 5. Synthetic end-to-end through the command layer

#ifdef ECPE_HAVE_COMMANDS

cli::ExperimentConfig desk_config(const fs::path& root)
{
    cli::ExperimentConfig config = cli::ExperimentConfig::defaults();
    config.set("paths.output_dir", (root / "run").string());
    for (const char* stage : {"emotion", "cause"}) {
        config.set(std::string(stage) + ".hidden", "64");
        config.set(std::string(stage) + ".layers", "2");
    }
    for (const char* stage : {"emotion", "cause", "pairing"}) {
        config.set(std::string(stage) + ".epochs", "10");
        config.set(std::string(stage) + ".lr", "0.003");
    }
    return config;
}

double end_to_end(const std::string& emotion_variant, const std::string& cause_variant, double& seconds)
{
    const auto start = std::chrono::steady_clock::now();
    const fs::path root = scratch_dir("e2e_" + emotion_variant);
    cli::Logger log;
    cli::ExperimentConfig config = desk_config(root);
    cli::cmd_synth(config, root / "synth", log);
    cli::cmd_prepare(config, log);
    cli::cmd_train(config, {"emotion", emotion_variant, false}, log);
    cli::cmd_train(config, {"cause", cause_variant, false}, log);
    cli::cmd_train(config, {"pairing", std::nullopt, false}, log);
    cli::cmd_predict(config, {root / "synth" / "test.json", root / "pred.json", {}, {}, {}}, log);
    const auto report = cli::cmd_evaluate(root / "synth" / "test.json", root / "pred.json", std::nullopt, log);
    seconds = seconds_since(start);
    return report["pairs"]["weighted_f1"].get<double>();
}

Outcome synthetic_end_to_end()
{
    struct Run {
        const char* emotion;
        const char* cause;
        double target;
    };
    bool ok = true;
    Detail detail;
    for (const Run& r : {Run{"dense", "dense", 0.90}, Run{"bilstm", "bilstm", 0.85},
                         Run{"bilstm_crf", "bilstm", 0.85}}) {
        double seconds = 0.0;
        const double f1 = end_to_end(r.emotion, r.cause, seconds);
        ok = ok && f1 >= r.target && seconds < 600.0;
        detail.add(std::string(r.emotion) + "_pair_f1", f1).add(std::string(r.emotion) + "_s", seconds);
    }
    return {ok, detail.str()};
}

#endif

// ---------------------------------------------------------------------------
// 6. Overfit a small subset

Outcome overfit()
{
    SyntheticCorpusOptions o;
    o.num_conversations = 10;
    o.seed = 5;
    const Dataset d = synthesize_dataset(o);
    // Unplanted features: labels can only be memorized.
    const auto provider = synthetic_provider(17, {16, 8, 8}, d);
    const auto examples = emotion_examples(d, provider);

    bool ok = true;
    Detail detail;
    for (auto v : {EmotionVariant::dense, EmotionVariant::bilstm, EmotionVariant::bilstm_crf}) {
        EmotionModelConfig c;
        c.variant = v;
        c.input_width = 32;
        c.hidden = 64;
        c.num_layers = 1;
        c.embedding_dropout = 0.0;
        c.inter_layer_dropout = 0.0;
        EmotionModel m(c);
        Rng rng(23);
        m.init(rng);

        TrainOptions opts;
        opts.optimizer.lr = 1e-2;
        opts.optimizer.weight_decay = 0.0;
        opts.batch_size = 16;
        StageTask task = emotion_task(m, examples, {}, Vector::Ones(kNumEmotions), opts);
        opts.epochs = 200 / task.batches_per_epoch;
        Trainer trainer(std::move(task), opts);
        while (trainer.epochs_done() < opts.epochs) trainer.run_epoch();

        std::vector<int> gold, pred;
        for (const auto& ex : examples) {
            const auto p = m.predict_indices(ex.features);
            gold.insert(gold.end(), ex.labels.begin(), ex.labels.end());
            pred.insert(pred.end(), p.begin(), p.end());
        }
        const double f1 = eval::stage_metrics(pred, gold, kNumEmotions).weighted_f1;
        ok = ok && f1 >= 0.99 && trainer.total_steps() <= 200;
        detail.add(std::string(variant_name(v)) + "_f1", f1)
            .add(std::string(variant_name(v)) + "_steps", trainer.total_steps());
    }
    return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 7. Weighted CE reduces to CE under uniform counts

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

Outcome weighted_ce_reduction()
{
    EmotionCounts uniform;
    uniform.fill(37);
    const auto weights = emotion_class_weights(uniform);
    bool weights_one = true;
    for (double w : weights) weights_one = weights_one && w == 1.0;
    const Vector w = Eigen::Map<const Vector>(weights.data(), kNumEmotions);

    Rng rng(64);
    std::uniform_int_distribution<int> label(0, kNumEmotions - 1);
    std::uniform_int_distribution<int> length(1, 12);
    int mismatches = 0;
    double oracle_err = 0.0;
    for (int i = 0; i < 100; ++i) {
        const int n = length(rng);
        const Matrix logits = normal(n, kNumEmotions, rng, 3.0);
        std::vector<int> y(static_cast<std::size_t>(n));
        for (int& t : y) t = label(rng);

        const auto weighted = weighted_cross_entropy_mean(logits, y, w);
        const double inv_n = 1.0 / static_cast<double>(n);
        double unweighted = 0.0;
        Matrix grad(n, kNumEmotions);
        for (int t = 0; t < n; ++t) {
            unweighted += cross_entropy(logits.row(t), y[static_cast<std::size_t>(t)]);
            grad.row(t) = inv_n * softmax(logits.row(t));
            grad(t, y[static_cast<std::size_t>(t)]) -= inv_n;
            mismatches += !same_bits(weighted_cross_entropy(logits.row(t), y[static_cast<std::size_t>(t)], w),
                                     cross_entropy(logits.row(t), y[static_cast<std::size_t>(t)]));
        }
        unweighted *= inv_n;
        mismatches += !same_bits(weighted.loss, unweighted);
        for (Index k = 0; k < grad.size(); ++k) mismatches += !same_bits(weighted.grad.data()[k], grad.data()[k]);

        // Independent value check.
        double ref = 0.0;
        for (int t = 0; t < n; ++t) {
            const double m = logits.row(t).maxCoeff();
            ref += m + std::log((logits.row(t).array() - m).exp().sum()) - logits(t, y[static_cast<std::size_t>(t)]);
        }
        oracle_err = std::max(oracle_err, std::abs(ref / n - weighted.loss));
    }
    return {weights_one && mismatches == 0 && oracle_err < 1e-12,
            Detail()
                .add("weights_all_one", weights_one ? "yes" : "no")
                .add("bit_mismatches", mismatches)
                .add("max_err_vs_reference", oracle_err)
                .str()};
}

// ---------------------------------------------------------------------------
// 8. Deterministic prediction

#ifdef ECPE_HAVE_COMMANDS

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome deterministic_predict()
{
    const fs::path root = scratch_dir("determinism");
    cli::Logger log;
    cli::ExperimentConfig config = desk_config(root);
    config.set("synthetic.conversations", "40");
    config.set("synthetic.held_out_conversations", "20");
    for (const char* stage : {"emotion", "cause", "pairing"}) config.set(std::string(stage) + ".epochs", "2");
    cli::cmd_synth(config, root / "synth", log);
    cli::cmd_prepare(config, log);
    cli::cmd_train(config, {"emotion", "bilstm_crf", false}, log);
    cli::cmd_train(config, {"cause", "bilstm", false}, log);
    cli::cmd_train(config, {"pairing", std::nullopt, false}, log);
    const fs::path input = root / "synth" / "test.json";
    cli::cmd_predict(config, {input, root / "a.json", {}, {}, {}}, log);
    cli::cmd_predict(config, {input, root / "b.json", {}, {}, {}}, log);
    const std::string a = slurp(root / "a.json"), b = slurp(root / "b.json");
    return {!a.empty() && a == b, Detail().add("bytes", a.size()).add("identical", a == b ? "yes" : "no").str()};
}

#endif

Outcome unavailable()
{
    return {false, "command layer not built (configure with ECPE_BUILD_TOOLS=ON)"};
}

} // namespace

int main(int argc, char** argv)
{
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
#ifdef ECPE_HAVE_COMMANDS
    const std::function<Outcome()> e2e = synthetic_end_to_end, determinism = deterministic_predict;
#else
    const std::function<Outcome()> e2e = unavailable, determinism = unavailable;
#endif
    const std::vector<Criterion> criteria{
        {1, "crf matches exhaustive enumeration", crf_oracle},
        {2, "gradient checks", gradient_checks},
        {3, "metric fixtures and gold-vs-gold", metric_fixtures},
        {4, "negative sampling ratio, cleanliness, reproducibility", negative_sampling},
        {5, "synthetic end-to-end pair F1", e2e},
        {6, "overfit 10 conversations in 200 steps", overfit},
        {7, "weighted CE reduces to CE under uniform counts", weighted_ce_reduction},
        {8, "byte-identical predictions", determinism},
    };

    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        Outcome r;
        try {
            r = c.run();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        failures += !r.passed;
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << c.id << ' ' << c.name << " (" << r.detail << ")"
                  << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
