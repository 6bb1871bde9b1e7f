#include "ecpe/corpus.hpp"

#include "ecpe/error.hpp"
#include "ecpe/tensor.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace ecpe {

namespace {

constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "anger", "disgust", "fear", "joy", "neutral", "sadness", "surprise",
};

std::string conversation_context(int id)
{
    return "conversation " + std::to_string(id);
}

std::optional<int> parse_int(std::string_view s)
{
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return value;
}

template <typename T>
T require_field(const nlohmann::json& obj, const char* field, const std::string& where)
{
    auto it = obj.find(field);
    if (it == obj.end()) {
        throw LoadError(where + ": missing field '" + field + "'");
    }
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw LoadError(where + ": field '" + field + "' has the wrong type");
    }
}

// "<id>_<emotion>"
EmotionCausePair parse_emotion_slot(const std::string& s, const std::string& where)
{
    auto sep = s.find('_');
    if (sep == std::string::npos) {
        throw LoadError(where + ": malformed emotion slot '" + s + "', expected <id>_<emotion>");
    }
    auto id = parse_int(std::string_view(s).substr(0, sep));
    if (!id) {
        throw LoadError(where + ": malformed utterance id in '" + s + "'");
    }
    EmotionCausePair pair;
    pair.emotion_utterance_id = *id;
    try {
        pair.emotion = parse_emotion(std::string_view(s).substr(sep + 1));
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
    }
    return pair;
}

// "<id>", or "<id>_<span text>" as in the span-level release.
int parse_cause_slot(const std::string& s, const std::string& where)
{
    std::string_view view(s);
    auto sep = view.find('_');
    auto id = parse_int(view.substr(0, sep));
    if (!id) {
        throw LoadError(where + ": malformed cause id '" + s + "'");
    }
    return *id;
}

Conversation parse_conversation(const nlohmann::json& obj, std::size_t position)
{
    if (!obj.is_object()) {
        throw LoadError("entry " + std::to_string(position) + ": expected an object");
    }
    Conversation conv;
    conv.conversation_id = require_field<int>(obj, "conversation_ID", "entry " + std::to_string(position));
    const std::string where = conversation_context(conv.conversation_id);

    auto utts = obj.find("conversation");
    if (utts == obj.end() || !utts->is_array()) {
        throw LoadError(where + ": field 'conversation' missing or not a list");
    }
    for (const auto& u : *utts) {
        if (!u.is_object()) {
            throw LoadError(where + ": field 'conversation' holds a non-object entry");
        }
        Utterance utt;
        utt.utterance_id = require_field<int>(u, "utterance_ID", where);
        const std::string uwhere = where + " utterance " + std::to_string(utt.utterance_id);
        utt.transcript = require_field<std::string>(u, "text", uwhere);
        utt.speaker = require_field<std::string>(u, "speaker", uwhere);
        if (auto e = u.find("emotion"); e != u.end() && !e->is_null()) {
            if (!e->is_string()) {
                throw LoadError(uwhere + ": field 'emotion' has the wrong type");
            }
            try {
                utt.gold_emotion = parse_emotion(e->get<std::string>());
            } catch (const ValidationError& err) {
                throw ValidationError(uwhere + ": field 'emotion': " + err.what());
            }
        }
        conv.utterances.push_back(std::move(utt));
    }

    if (auto p = obj.find("emotion-cause_pairs"); p != obj.end() && !p->is_null()) {
        if (!p->is_array()) {
            throw LoadError(where + ": field 'emotion-cause_pairs' is not a list");
        }
        std::vector<EmotionCausePair> pairs;
        for (const auto& entry : *p) {
            if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() ||
                !entry[1].is_string()) {
                throw LoadError(where + ": field 'emotion-cause_pairs' entries must be [string, string]");
            }
            EmotionCausePair pair = parse_emotion_slot(entry[0].get<std::string>(), where);
            pair.cause_utterance_id = parse_cause_slot(entry[1].get<std::string>(), where);
            pairs.push_back(pair);
        }
        conv.gold_pairs = std::move(pairs);
    }
    return conv;
}

std::string to_lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

Emotion emotion_from_index(int index)
{
    if (index < 0 || index >= kNumEmotions) {
        throw ValidationError("emotion index out of range: " + std::to_string(index));
    }
    return static_cast<Emotion>(index);
}

std::string_view emotion_name(Emotion e)
{
    return kEmotionNames[static_cast<std::size_t>(emotion_index(e))];
}

Emotion parse_emotion(std::string_view name)
{
    const std::string lower = to_lower(name);
    for (int i = 0; i < kNumEmotions; ++i) {
        if (lower == kEmotionNames[static_cast<std::size_t>(i)]) {
            return static_cast<Emotion>(i);
        }
    }
    throw ValidationError("unknown emotion '" + std::string(name) + "'");
}

std::string_view split_tag_name(SplitTag tag)
{
    switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
    }
    return "unknown";
}

std::size_t Dataset::num_utterances() const
{
    std::size_t n = 0;
    for (const auto& c : conversations) {
        n += c.utterances.size();
    }
    return n;
}

void validate(const Conversation& conv)
{
    const std::string where = conversation_context(conv.conversation_id);
    if (conv.utterances.empty()) {
        throw ValidationError(where + ": field 'conversation' is empty");
    }
    for (std::size_t i = 0; i < conv.utterances.size(); ++i) {
        if (conv.utterances[i].utterance_id != static_cast<int>(i) + 1) {
            throw ValidationError(where + ": field 'utterance_ID' must run 1.." +
                                  std::to_string(conv.utterances.size()) + " in order, found " +
                                  std::to_string(conv.utterances[i].utterance_id) +
                                  " at position " + std::to_string(i + 1));
        }
    }
    if (!conv.gold_pairs) {
        return;
    }
    const int n = conv.size();
    for (const auto& pair : *conv.gold_pairs) {
        const std::string pwhere = where + ": pair (" + std::to_string(pair.emotion_utterance_id) +
                                   "_" + std::string(emotion_name(pair.emotion)) + ", " +
                                   std::to_string(pair.cause_utterance_id) + ")";
        if (pair.emotion_utterance_id < 1 || pair.emotion_utterance_id > n) {
            throw ValidationError(pwhere + " references missing emotion utterance");
        }
        if (pair.cause_utterance_id < 1 || pair.cause_utterance_id > n) {
            throw ValidationError(pwhere + " references missing cause utterance");
        }
        if (pair.emotion == Emotion::neutral) {
            throw ValidationError(pwhere + " has neutral emotion");
        }
        const auto& gold = conv.utterances[static_cast<std::size_t>(pair.emotion_utterance_id - 1)].gold_emotion;
        if (!gold || *gold != pair.emotion) {
            throw ValidationError(pwhere + " disagrees with the utterance's emotion label");
        }
    }
}

void validate(const Dataset& dataset)
{
    std::set<int> seen;
    for (const auto& conv : dataset.conversations) {
        if (!seen.insert(conv.conversation_id).second) {
            throw ValidationError(conversation_context(conv.conversation_id) +
                                  ": duplicate conversation_ID");
        }
        validate(conv);
    }
}

Dataset parse_dataset(std::istream& in, SplitTag tag)
{
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError(std::string("dataset is not valid JSON: ") + e.what());
    }
    if (!root.is_array()) {
        throw LoadError("dataset must be a JSON list of conversations");
    }
    Dataset ds;
    ds.split_tag = tag;
    ds.conversations.reserve(root.size());
    for (std::size_t i = 0; i < root.size(); ++i) {
        ds.conversations.push_back(parse_conversation(root[i], i));
    }
    validate(ds);
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path, SplitTag tag)
{
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open dataset " + path.string());
    }
    try {
        return parse_dataset(in, tag);
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

void write_dataset(std::ostream& out, const Dataset& dataset)
{
    nlohmann::ordered_json root = nlohmann::ordered_json::array();
    for (const auto& conv : dataset.conversations) {
        nlohmann::ordered_json c;
        c["conversation_ID"] = conv.conversation_id;
        nlohmann::ordered_json utts = nlohmann::ordered_json::array();
        for (const auto& u : conv.utterances) {
            nlohmann::ordered_json ju;
            ju["utterance_ID"] = u.utterance_id;
            ju["text"] = u.transcript;
            ju["speaker"] = u.speaker;
            if (u.gold_emotion) {
                ju["emotion"] = std::string(emotion_name(*u.gold_emotion));
            }
            utts.push_back(std::move(ju));
        }
        c["conversation"] = std::move(utts);
        if (conv.gold_pairs) {
            nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
            for (const auto& p : *conv.gold_pairs) {
                pairs.push_back({std::to_string(p.emotion_utterance_id) + "_" +
                                     std::string(emotion_name(p.emotion)),
                                 std::to_string(p.cause_utterance_id)});
            }
            c["emotion-cause_pairs"] = std::move(pairs);
        }
        root.push_back(std::move(c));
    }
    out << root.dump(2) << '\n';
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw LoadError("cannot write dataset " + path.string());
    }
    write_dataset(out, dataset);
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset, double val_fraction,
                                            std::uint64_t seed)
{
    const std::size_t n = dataset.conversations.size();
    if (n < 2) {
        throw ValidationError("split needs at least 2 conversations, got " + std::to_string(n));
    }
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw ValidationError("val_fraction must lie in (0, 1)");
    }
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
    if (n_val == 0 || n_val == n) {
        throw ValidationError("val_fraction " + std::to_string(val_fraction) + " leaves one side of a " +
                              std::to_string(n) + "-conversation split empty");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = derive_rng(seed, {0x5EC7});
    std::shuffle(order.begin(), order.end(), rng);

    Dataset train;
    Dataset val;
    train.split_tag = SplitTag::train;
    val.split_tag = SplitTag::val;
    for (std::size_t i = 0; i < n; ++i) {
        auto& side = i < n - n_val ? train : val;
        side.conversations.push_back(dataset.conversations[order[i]]);
    }
    return {std::move(train), std::move(val)};
}

EmotionCounts emotion_histogram(const Dataset& dataset)
{
    EmotionCounts counts{};
    for (const auto& conv : dataset.conversations) {
        for (const auto& u : conv.utterances) {
            if (u.gold_emotion) {
                ++counts[static_cast<std::size_t>(emotion_index(*u.gold_emotion))];
            }
        }
    }
    return counts;
}

std::array<double, kNumEmotions> emotion_class_weights(const EmotionCounts& counts,
                                                       std::int64_t floor_count)
{
    const std::int64_t total = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    if (total == 0) {
        throw ValidationError("class weights need at least one labeled utterance");
    }
    std::array<double, kNumEmotions> weights{};
    for (int c = 0; c < kNumEmotions; ++c) {
        const std::int64_t count = std::max(counts[static_cast<std::size_t>(c)], floor_count);
        if (count <= 0) {
            throw ValidationError("emotion '" + std::string(emotion_name(static_cast<Emotion>(c))) +
                                  "' never occurs in training data; set a floor count >= 1");
        }
        weights[static_cast<std::size_t>(c)] =
            static_cast<double>(total) / (static_cast<double>(kNumEmotions) * static_cast<double>(count));
    }
    return weights;
}

std::array<double, kNumEmotions> emotion_class_weights(const Dataset& train, std::int64_t floor_count)
{
    return emotion_class_weights(emotion_histogram(train), floor_count);
}

std::vector<int> derive_cause_labels(const Conversation& conversation)
{
    std::vector<int> labels(conversation.utterances.size(), 0);
    if (!conversation.gold_pairs) {
        throw ValidationError(conversation_context(conversation.conversation_id) +
                              ": cause labels need gold pairs");
    }
    for (const auto& p : *conversation.gold_pairs) {
        labels.at(static_cast<std::size_t>(p.cause_utterance_id - 1)) = 1;
    }
    return labels;
}

std::vector<int> emotion_labels(const Conversation& conversation)
{
    std::vector<int> labels;
    labels.reserve(conversation.utterances.size());
    for (const auto& u : conversation.utterances) {
        if (!u.gold_emotion) {
            throw ValidationError(conversation_context(conversation.conversation_id) + " utterance " +
                                  std::to_string(u.utterance_id) + ": missing field 'emotion'");
        }
        labels.push_back(emotion_index(*u.gold_emotion));
    }
    return labels;
}

} // namespace ecpe
