#include "ecpe/metrics.hpp"

#include "ecpe/error.hpp"

#include <map>
#include <set>

namespace ecpe::eval {

namespace {

void finish(ClassScores& c)
{
    c.precision = c.predicted > 0 ? static_cast<double>(c.true_positive) / static_cast<double>(c.predicted) : 0.0;
    c.recall = c.support > 0 ? static_cast<double>(c.true_positive) / static_cast<double>(c.support) : 0.0;
    c.f1 = f1_score(c.precision, c.recall);
}

nlohmann::json scores_json(const ClassScores& c)
{
    return {{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1},
            {"support", c.support}, {"predicted", c.predicted}, {"true_positive", c.true_positive}};
}

void check_non_neutral(std::span<const ScoredPair> pairs, const char* side)
{
    for (const auto& p : pairs) {
        if (p.pair.emotion == Emotion::neutral) {
            throw ValidationError(std::string(side) + " pair in conversation " +
                                  std::to_string(p.conversation_id) + " (" +
                                  std::to_string(p.pair.emotion_utterance_id) + ", " +
                                  std::to_string(p.pair.cause_utterance_id) + ") has neutral emotion");
        }
    }
}

} // namespace

StageMetrics stage_metrics(std::span<const int> predicted, std::span<const int> gold, int n_classes)
{
    if (predicted.size() != gold.size()) {
        throw ShapeError("stage_metrics: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(gold.size()) + " gold labels");
    }
    if (n_classes < 1) {
        throw ShapeError("stage_metrics needs at least one class");
    }
    StageMetrics m;
    m.per_class.assign(static_cast<std::size_t>(n_classes), ClassScores{});
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const int p = predicted[i];
        const int g = gold[i];
        if (p < 0 || p >= n_classes || g < 0 || g >= n_classes) {
            throw ValidationError("stage_metrics: label outside [0, " + std::to_string(n_classes) + ")");
        }
        ++m.per_class[static_cast<std::size_t>(g)].support;
        ++m.per_class[static_cast<std::size_t>(p)].predicted;
        if (p == g) {
            ++m.per_class[static_cast<std::size_t>(g)].true_positive;
            ++correct;
        }
    }

    const auto total = static_cast<double>(gold.size());
    int macro_count = 0;
    for (auto& c : m.per_class) {
        finish(c);
        if (c.support == 0) {
            continue;
        }
        const double w = static_cast<double>(c.support) / total;
        m.weighted_precision += w * c.precision;
        m.weighted_recall += w * c.recall;
        m.weighted_f1 += w * c.f1;
        m.macro_f1 += c.f1;
        ++macro_count;
    }
    if (macro_count > 0) {
        m.macro_f1 /= macro_count;
    }
    m.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / total;
    return m;
}

PairMetrics pair_metrics(std::span<const ScoredPair> predicted, std::span<const ScoredPair> gold)
{
    check_non_neutral(predicted, "predicted");
    check_non_neutral(gold, "gold");
    const std::set<ScoredPair> pred_set(predicted.begin(), predicted.end());
    const std::set<ScoredPair> gold_set(gold.begin(), gold.end());

    PairMetrics m;
    for (const auto& g : gold_set) {
        ++m.per_emotion[static_cast<std::size_t>(emotion_index(g.pair.emotion))].support;
    }
    for (const auto& p : pred_set) {
        auto& c = m.per_emotion[static_cast<std::size_t>(emotion_index(p.pair.emotion))];
        ++c.predicted;
        if (gold_set.contains(p)) {
            ++c.true_positive;
        }
    }

    std::int64_t total_gold = 0;
    for (Emotion e : kAllEmotions) {
        if (e == Emotion::neutral) {
            continue;
        }
        auto& c = m.per_emotion[static_cast<std::size_t>(emotion_index(e))];
        finish(c);
        total_gold += c.support;
        if (c.support > 0 || c.predicted > 0) {
            m.macro_f1 += c.f1;
            ++m.macro_classes;
        }
    }
    if (m.macro_classes > 0) {
        m.macro_f1 /= m.macro_classes;
    }
    if (total_gold > 0) {
        for (const auto& c : m.per_emotion) {
            const double w = static_cast<double>(c.support) / static_cast<double>(total_gold);
            m.weighted_precision += w * c.precision;
            m.weighted_recall += w * c.recall;
            m.weighted_f1 += w * c.f1;
        }
    }
    return m;
}

std::vector<ScoredPair> collect_pairs(const Dataset& dataset)
{
    std::vector<ScoredPair> out;
    for (const auto& conv : dataset.conversations) {
        if (!conv.gold_pairs) {
            continue;
        }
        for (const auto& p : *conv.gold_pairs) {
            out.push_back({conv.conversation_id, p});
        }
    }
    return out;
}

nlohmann::json to_json(const StageMetrics& m, std::span<const std::string> class_names)
{
    nlohmann::json per_class = nlohmann::json::object();
    for (std::size_t i = 0; i < m.per_class.size(); ++i) {
        const std::string name = i < class_names.size() ? class_names[i] : std::to_string(i);
        per_class[name] = scores_json(m.per_class[i]);
    }
    return {{"weighted_precision", m.weighted_precision},
            {"weighted_recall", m.weighted_recall},
            {"weighted_f1", m.weighted_f1},
            {"macro_f1", m.macro_f1},
            {"accuracy", m.accuracy},
            {"per_class", std::move(per_class)}};
}

nlohmann::json to_json(const PairMetrics& m)
{
    nlohmann::json per = nlohmann::json::object();
    for (Emotion e : kAllEmotions) {
        if (e != Emotion::neutral) {
            per[std::string(emotion_name(e))] = scores_json(m.per_emotion[static_cast<std::size_t>(emotion_index(e))]);
        }
    }
    return {{"weighted_precision", m.weighted_precision},
            {"weighted_recall", m.weighted_recall},
            {"weighted_f1", m.weighted_f1},
            {"macro_f1", m.macro_f1},
            {"macro_classes", m.macro_classes},
            {"per_emotion", std::move(per)}};
}

nlohmann::json score_datasets(const Dataset& gold, const Dataset& predicted)
{
    std::map<int, const Conversation*> pred_by_id;
    for (const auto& c : predicted.conversations) {
        pred_by_id[c.conversation_id] = &c;
    }
    if (pred_by_id.size() != gold.conversations.size()) {
        throw ValidationError("prediction file has " + std::to_string(pred_by_id.size()) +
                              " conversations, gold has " + std::to_string(gold.conversations.size()));
    }

    bool emotions_complete = true;
    bool pairs_complete = true;
    std::vector<int> emo_gold, emo_pred, cause_gold, cause_pred;
    for (const auto& g : gold.conversations) {
        auto it = pred_by_id.find(g.conversation_id);
        if (it == pred_by_id.end()) {
            throw ValidationError("conversation " + std::to_string(g.conversation_id) +
                                  " is missing from the prediction file");
        }
        const Conversation& p = *it->second;
        if (p.size() != g.size()) {
            throw ValidationError("conversation " + std::to_string(g.conversation_id) + ": prediction has " +
                                  std::to_string(p.size()) + " utterances, gold has " + std::to_string(g.size()));
        }
        for (std::size_t i = 0; i < g.utterances.size(); ++i) {
            const auto& ge = g.utterances[i].gold_emotion;
            const auto& pe = p.utterances[i].gold_emotion;
            if (ge && pe) {
                emo_gold.push_back(emotion_index(*ge));
                emo_pred.push_back(emotion_index(*pe));
            } else {
                emotions_complete = false;
            }
        }
        if (g.gold_pairs && p.gold_pairs) {
            const auto gc = derive_cause_labels(g);
            const auto pc = derive_cause_labels(p);
            cause_gold.insert(cause_gold.end(), gc.begin(), gc.end());
            cause_pred.insert(cause_pred.end(), pc.begin(), pc.end());
        } else {
            pairs_complete = false;
        }
    }

    nlohmann::json report = nlohmann::json::object();
    report["conversations"] = gold.conversations.size();
    if (emotions_complete) {
        std::vector<std::string> names;
        for (Emotion e : kAllEmotions) {
            names.emplace_back(emotion_name(e));
        }
        report["emotion"] = to_json(stage_metrics(emo_pred, emo_gold, kNumEmotions), names);
    }
    if (pairs_complete) {
        const std::vector<std::string> names = {"not_candidate_cause", "is_candidate_cause"};
        report["candidate_cause"] = to_json(stage_metrics(cause_pred, cause_gold, 2), names);
        const auto gp = collect_pairs(gold);
        const auto pp = collect_pairs(predicted);
        report["pairs"] = to_json(pair_metrics(pp, gp));
    } else if (!gold.conversations.empty()) {
        throw ValidationError("pair scoring needs emotion-cause_pairs in both files");
    }
    return report;
}

} // namespace ecpe::eval
