#pragma once

// Per-utterance feature vectors from three modality sources, fused in a
// fixed text | audio | video order.

#include "ecpe/corpus.hpp"
#include "ecpe/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ecpe {

enum class Modality { text = 0, audio = 1, video = 2 };

std::string_view modality_name(Modality m);
Modality parse_modality(std::string_view name);

inline constexpr std::string_view kFusionOrder = "text|audio|video";

struct ModalityEmbedding {
    Modality modality = Modality::text;
    Vector vector;
};

struct UtteranceKey {
    int conversation_id = 0;
    int utterance_id = 0;
    auto operator<=>(const UtteranceKey&) const = default;
};

Vector mean_pool(std::span<const Vector> vectors);

// floor(i * (n_total - 1) / (k - 1)) for i in [0, k). k == 1 yields {0}.
std::vector<int> equally_spaced_indices(int n_total, int k);

// The video pooling rule: mean of k equally spaced frame embeddings.
Vector pool_frames(std::span<const Vector> frames, int k = 16);

// Concatenates in text | audio | video order; throws on a tag mismatch.
Vector fuse(const ModalityEmbedding& text, const ModalityEmbedding& audio,
            const ModalityEmbedding& video);

// All vectors of one modality, keyed by utterance.
class ModalityTable {
public:
    ModalityTable(Modality modality, int dim);

    Modality modality() const { return modality_; }
    int dim() const { return dim_; }
    std::size_t size() const { return rows_.size(); }

    // Throws on a duplicate key, wrong width or non-finite entry.
    void insert(UtteranceKey key, Vector v);
    const Vector* find(UtteranceKey key) const;
    bool contains(UtteranceKey key) const { return find(key) != nullptr; }

    const std::map<UtteranceKey, Vector>& rows() const { return rows_; }

private:
    Modality modality_;
    int dim_;
    std::map<UtteranceKey, Vector> rows_;
};

// Embedding file: a header `dim=<d> modality=<m>` then
// `<conversation_id> <utterance_id> <d reals>` per line.
ModalityTable parse_precomputed(std::istream& in, std::optional<Modality> expected = {});
ModalityTable load_precomputed(const std::filesystem::path& path,
                               std::optional<Modality> expected = {});
void write_precomputed(std::ostream& out, const ModalityTable& table);
void save_precomputed(const std::filesystem::path& path, const ModalityTable& table);

struct ModalityDims {
    int text = 0;
    int audio = 0;
    int video = 0;
    int total() const { return text + audio + video; }
    bool operator==(const ModalityDims&) const = default;
};

class EmbeddingProvider {
public:
    EmbeddingProvider(std::string name, ModalityTable text, ModalityTable audio,
                      ModalityTable video);

    const std::string& name() const { return name_; }
    ModalityDims dims() const;
    int width() const { return dims().total(); }

    const ModalityTable& table(Modality m) const;

    // Throws LoadError if any modality lacks the key.
    Vector features(UtteranceKey key) const;
    // One fused row per utterance, in conversation order.
    Matrix features(const Conversation& conversation) const;

    std::vector<std::pair<UtteranceKey, Modality>> missing_keys(const Dataset& dataset) const;
    // Throws LoadError listing (a prefix of) the missing keys.
    void require_complete(const Dataset& dataset) const;

private:
    std::string name_;
    ModalityTable text_;
    ModalityTable audio_;
    ModalityTable video_;
};

EmbeddingProvider load_provider(const std::filesystem::path& text,
                                const std::filesystem::path& audio,
                                const std::filesystem::path& video);

// Label signal hidden in the text block of synthetic vectors.
struct PlantedRule {
    // Text coordinates [0, 7) carry one-hot(gold emotion) + noise.
    double noise_sigma = 0.1;
    // When set, text coordinate 7 carries 1[utterance is a gold cause] + noise.
    bool cause_flag = true;
};

// Standard-normal vectors drawn per (seed, conversation, utterance, modality),
// so every vector is independent of iteration order.
EmbeddingProvider synthetic_provider(std::uint64_t seed, ModalityDims dims,
                                     const Dataset& dataset,
                                     std::optional<PlantedRule> planted = {});

} // namespace ecpe
