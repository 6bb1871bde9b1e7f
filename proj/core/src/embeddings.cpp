#include "ecpe/embeddings.hpp"

#include "ecpe/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ecpe {

namespace {

std::string key_string(UtteranceKey key)
{
    return "(" + std::to_string(key.conversation_id) + ", " + std::to_string(key.utterance_id) + ")";
}

// Parses the next whitespace-delimited token from `line` starting at `pos`.
std::string_view next_token(std::string_view line, std::size_t& pos)
{
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) {
        ++pos;
    }
    const std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t' && line[pos] != '\r') {
        ++pos;
    }
    return line.substr(start, pos - start);
}

template <typename T>
bool parse_number(std::string_view s, T& out)
{
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

} // namespace

std::string_view modality_name(Modality m)
{
    switch (m) {
    case Modality::text: return "text";
    case Modality::audio: return "audio";
    case Modality::video: return "video";
    }
    return "unknown";
}

Modality parse_modality(std::string_view name)
{
    if (name == "text") return Modality::text;
    if (name == "audio") return Modality::audio;
    if (name == "video") return Modality::video;
    throw LoadError("unknown modality '" + std::string(name) + "'");
}

Vector mean_pool(std::span<const Vector> vectors)
{
    if (vectors.empty()) {
        throw ShapeError("mean_pool of an empty list");
    }
    Vector sum = Vector::Zero(vectors.front().size());
    for (const auto& v : vectors) {
        if (v.size() != sum.size()) {
            throw ShapeError("mean_pool inputs differ in dimension");
        }
        sum += v;
    }
    return sum / static_cast<double>(vectors.size());
}

std::vector<int> equally_spaced_indices(int n_total, int k)
{
    if (n_total < 1 || k < 1) {
        throw ShapeError("equally_spaced_indices needs n_total >= 1 and k >= 1");
    }
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    if (k == 1) {
        return idx;
    }
    for (int i = 0; i < k; ++i) {
        idx[static_cast<std::size_t>(i)] = static_cast<int>(
            static_cast<std::int64_t>(i) * (n_total - 1) / (k - 1));
    }
    return idx;
}

Vector pool_frames(std::span<const Vector> frames, int k)
{
    if (frames.empty()) {
        throw ShapeError("pool_frames of an empty clip");
    }
    std::vector<Vector> picked;
    for (int i : equally_spaced_indices(static_cast<int>(frames.size()), k)) {
        picked.push_back(frames[static_cast<std::size_t>(i)]);
    }
    return mean_pool(picked);
}

Vector fuse(const ModalityEmbedding& text, const ModalityEmbedding& audio,
            const ModalityEmbedding& video)
{
    if (text.modality != Modality::text || audio.modality != Modality::audio ||
        video.modality != Modality::video) {
        throw ValidationError("fuse expects text, audio, video in that order");
    }
    Vector out(text.vector.size() + audio.vector.size() + video.vector.size());
    out << text.vector, audio.vector, video.vector;
    return out;
}

// ---------------------------------------------------------------------------

ModalityTable::ModalityTable(Modality modality, int dim) : modality_(modality), dim_(dim)
{
    if (dim < 1) {
        throw ShapeError("embedding dimension must be positive");
    }
}

void ModalityTable::insert(UtteranceKey key, Vector v)
{
    if (v.size() != dim_) {
        throw LoadError(std::string(modality_name(modality_)) + " embedding for " + key_string(key) +
                        " has " + std::to_string(v.size()) + " values, expected " + std::to_string(dim_));
    }
    if (!v.allFinite()) {
        throw LoadError(std::string(modality_name(modality_)) + " embedding for " + key_string(key) +
                        " has non-finite entries");
    }
    if (!rows_.emplace(key, std::move(v)).second) {
        throw LoadError(std::string(modality_name(modality_)) + " embedding: duplicate key " +
                        key_string(key));
    }
}

const Vector* ModalityTable::find(UtteranceKey key) const
{
    auto it = rows_.find(key);
    return it == rows_.end() ? nullptr : &it->second;
}

ModalityTable parse_precomputed(std::istream& in, std::optional<Modality> expected)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw LoadError("embedding file is empty");
    }
    int dim = 0;
    std::optional<Modality> modality;
    {
        std::size_t pos = 0;
        for (auto tok = next_token(line, pos); !tok.empty(); tok = next_token(line, pos)) {
            if (tok.starts_with("dim=")) {
                if (!parse_number(tok.substr(4), dim) || dim < 1) {
                    throw LoadError("embedding header: bad dim '" + std::string(tok) + "'");
                }
            } else if (tok.starts_with("modality=")) {
                modality = parse_modality(tok.substr(9));
            } else {
                throw LoadError("embedding header: unexpected token '" + std::string(tok) + "'");
            }
        }
    }
    if (dim == 0 || !modality) {
        throw LoadError("embedding header must be `dim=<d> modality=<m>`");
    }
    if (expected && *expected != *modality) {
        throw LoadError("embedding file holds " + std::string(modality_name(*modality)) +
                        " vectors, expected " + std::string(modality_name(*expected)));
    }

    ModalityTable table(*modality, dim);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        std::size_t pos = 0;
        UtteranceKey key;
        if (!parse_number(next_token(line, pos), key.conversation_id) ||
            !parse_number(next_token(line, pos), key.utterance_id)) {
            throw LoadError("embedding line " + std::to_string(line_no) + ": bad key");
        }
        std::vector<double> values;
        values.reserve(static_cast<std::size_t>(dim));
        for (auto tok = next_token(line, pos); !tok.empty(); tok = next_token(line, pos)) {
            double v = 0.0;
            if (!parse_number(tok, v)) {
                throw LoadError("embedding line " + std::to_string(line_no) + ": bad value '" +
                                std::string(tok) + "'");
            }
            values.push_back(v);
        }
        if (static_cast<int>(values.size()) != dim) {
            throw LoadError("embedding line " + std::to_string(line_no) + ": dimension mismatch, " +
                            std::to_string(values.size()) + " values for dim=" + std::to_string(dim));
        }
        table.insert(key, Eigen::Map<const Vector>(values.data(), dim));
    }
    return table;
}

ModalityTable load_precomputed(const std::filesystem::path& path, std::optional<Modality> expected)
{
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open embedding file " + path.string());
    }
    try {
        return parse_precomputed(in, expected);
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

void write_precomputed(std::ostream& out, const ModalityTable& table)
{
    out << "dim=" << table.dim() << " modality=" << modality_name(table.modality()) << '\n';
    char buf[32];
    for (const auto& [key, v] : table.rows()) {
        out << key.conversation_id << ' ' << key.utterance_id;
        for (Index i = 0; i < v.size(); ++i) {
            // Shortest representation that round-trips exactly.
            auto res = std::to_chars(buf, buf + sizeof(buf), v[i]);
            out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
}

void save_precomputed(const std::filesystem::path& path, const ModalityTable& table)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw LoadError("cannot write embedding file " + path.string());
    }
    write_precomputed(out, table);
}

// ---------------------------------------------------------------------------

EmbeddingProvider::EmbeddingProvider(std::string name, ModalityTable text, ModalityTable audio,
                                     ModalityTable video)
    : name_(std::move(name)), text_(std::move(text)), audio_(std::move(audio)), video_(std::move(video))
{
    if (text_.modality() != Modality::text || audio_.modality() != Modality::audio ||
        video_.modality() != Modality::video) {
        throw ShapeError("provider tables must be text, audio, video");
    }
}

ModalityDims EmbeddingProvider::dims() const
{
    return {text_.dim(), audio_.dim(), video_.dim()};
}

const ModalityTable& EmbeddingProvider::table(Modality m) const
{
    switch (m) {
    case Modality::text: return text_;
    case Modality::audio: return audio_;
    case Modality::video: return video_;
    }
    return text_;
}

Vector EmbeddingProvider::features(UtteranceKey key) const
{
    auto get = [&](const ModalityTable& t) -> ModalityEmbedding {
        const Vector* v = t.find(key);
        if (!v) {
            throw LoadError("no " + std::string(modality_name(t.modality())) + " embedding for " +
                            key_string(key));
        }
        return {t.modality(), *v};
    };
    return fuse(get(text_), get(audio_), get(video_));
}

Matrix EmbeddingProvider::features(const Conversation& conversation) const
{
    Matrix x(conversation.size(), width());
    for (int i = 0; i < conversation.size(); ++i) {
        const UtteranceKey key{conversation.conversation_id,
                               conversation.utterances[static_cast<std::size_t>(i)].utterance_id};
        x.row(i) = features(key).transpose();
    }
    return x;
}

std::vector<std::pair<UtteranceKey, Modality>> EmbeddingProvider::missing_keys(const Dataset& dataset) const
{
    std::vector<std::pair<UtteranceKey, Modality>> missing;
    for (const auto& conv : dataset.conversations) {
        for (const auto& u : conv.utterances) {
            const UtteranceKey key{conv.conversation_id, u.utterance_id};
            for (const ModalityTable* t : {&text_, &audio_, &video_}) {
                if (!t->contains(key)) {
                    missing.emplace_back(key, t->modality());
                }
            }
        }
    }
    return missing;
}

void EmbeddingProvider::require_complete(const Dataset& dataset) const
{
    const auto missing = missing_keys(dataset);
    if (missing.empty()) {
        return;
    }
    std::ostringstream msg;
    msg << missing.size() << " missing embeddings:";
    const std::size_t shown = std::min<std::size_t>(missing.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) {
        msg << ' ' << modality_name(missing[i].second) << key_string(missing[i].first);
    }
    if (shown < missing.size()) {
        msg << " ...";
    }
    throw LoadError(msg.str());
}

EmbeddingProvider load_provider(const std::filesystem::path& text, const std::filesystem::path& audio,
                                const std::filesystem::path& video)
{
    return EmbeddingProvider("precomputed", load_precomputed(text, Modality::text),
                             load_precomputed(audio, Modality::audio),
                             load_precomputed(video, Modality::video));
}

EmbeddingProvider synthetic_provider(std::uint64_t seed, ModalityDims dims, const Dataset& dataset,
                                     std::optional<PlantedRule> planted)
{
    if (dims.text < 1 || dims.audio < 1 || dims.video < 1) {
        throw ShapeError("synthetic provider dimensions must be positive");
    }
    if (planted) {
        const int needed = kNumEmotions + (planted->cause_flag ? 1 : 0);
        if (dims.text < needed) {
            throw ShapeError("planted rule needs a text dimension of at least " + std::to_string(needed));
        }
    }

    std::array<ModalityTable, 3> tables = {ModalityTable(Modality::text, dims.text),
                                           ModalityTable(Modality::audio, dims.audio),
                                           ModalityTable(Modality::video, dims.video)};
    const std::array<int, 3> widths = {dims.text, dims.audio, dims.video};

    for (const auto& conv : dataset.conversations) {
        std::vector<int> causes;
        if (planted && planted->cause_flag) {
            if (!conv.gold_pairs) {
                throw ValidationError("planted rule requested on unlabeled data (conversation " +
                                      std::to_string(conv.conversation_id) + " has no pairs)");
            }
            causes = derive_cause_labels(conv);
        }
        for (std::size_t i = 0; i < conv.utterances.size(); ++i) {
            const auto& u = conv.utterances[i];
            const UtteranceKey key{conv.conversation_id, u.utterance_id};
            for (std::size_t m = 0; m < 3; ++m) {
                Rng rng = derive_rng(seed, {static_cast<std::uint64_t>(conv.conversation_id),
                                            static_cast<std::uint64_t>(u.utterance_id), m});
                Matrix v(widths[m], 1);
                fill_normal(v, 1.0, rng);
                if (planted && m == 0) {
                    if (!u.gold_emotion) {
                        throw ValidationError("planted rule requested on unlabeled data (conversation " +
                                              std::to_string(conv.conversation_id) + " utterance " +
                                              std::to_string(u.utterance_id) + ")");
                    }
                    std::normal_distribution<double> noise(0.0, 1.0);
                    const int gold = emotion_index(*u.gold_emotion);
                    for (int k = 0; k < kNumEmotions; ++k) {
                        v(k, 0) = (k == gold ? 1.0 : 0.0) + planted->noise_sigma * noise(rng);
                    }
                    if (planted->cause_flag) {
                        v(kNumEmotions, 0) = static_cast<double>(causes[i]) +
                                             planted->noise_sigma * noise(rng);
                    }
                }
                tables[m].insert(key, v.col(0));
            }
        }
    }
    return EmbeddingProvider("synthetic", std::move(tables[0]), std::move(tables[1]),
                             std::move(tables[2]));
}

} // namespace ecpe
