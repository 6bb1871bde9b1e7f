#pragma once

// Conversation corpus: loading, validation, splitting and per-stage
// supervision signals.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ecpe {

// Indices follow alphabetical order of the label names.
enum class Emotion : int {
    anger = 0,
    disgust = 1,
    fear = 2,
    joy = 3,
    neutral = 4,
    sadness = 5,
    surprise = 6,
};

inline constexpr int kNumEmotions = 7;
inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions = {
    Emotion::anger, Emotion::disgust, Emotion::fear, Emotion::joy,
    Emotion::neutral, Emotion::sadness, Emotion::surprise,
};

inline constexpr int emotion_index(Emotion e) { return static_cast<int>(e); }
Emotion emotion_from_index(int index);
std::string_view emotion_name(Emotion e);
// Case-insensitive; throws ValidationError on unknown names.
Emotion parse_emotion(std::string_view name);

struct Utterance {
    int utterance_id = 0;  // 1-based within its conversation
    std::string speaker;
    std::string transcript;
    std::optional<Emotion> gold_emotion;

    bool operator==(const Utterance&) const = default;
};

struct EmotionCausePair {
    int emotion_utterance_id = 0;
    Emotion emotion = Emotion::neutral;
    int cause_utterance_id = 0;

    auto operator<=>(const EmotionCausePair&) const = default;
};

struct Conversation {
    int conversation_id = 0;
    std::vector<Utterance> utterances;
    std::optional<std::vector<EmotionCausePair>> gold_pairs;

    int size() const { return static_cast<int>(utterances.size()); }
    bool operator==(const Conversation&) const = default;
};

enum class SplitTag { train, val, test };

std::string_view split_tag_name(SplitTag tag);

struct Dataset {
    std::vector<Conversation> conversations;
    SplitTag split_tag = SplitTag::train;

    std::size_t num_utterances() const;
    bool operator==(const Dataset&) const = default;
};

// Throws ValidationError naming the offending conversation.
void validate(const Conversation& conversation);
void validate(const Dataset& dataset);

Dataset parse_dataset(std::istream& in, SplitTag tag = SplitTag::train);
Dataset load_dataset(const std::filesystem::path& path, SplitTag tag = SplitTag::train);

// Writes the same JSON schema that load_dataset reads. Output is deterministic.
void write_dataset(std::ostream& out, const Dataset& dataset);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

// Shuffles whole conversations with a seeded generator, then cuts.
// Returns (train, val) with |val| = round(val_fraction * N).
std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset, double val_fraction,
                                            std::uint64_t seed);

using EmotionCounts = std::array<std::int64_t, kNumEmotions>;

EmotionCounts emotion_histogram(const Dataset& dataset);

// w_c = T / (7 * max(count_c, floor_count)), T = number of labeled utterances.
// A zero count with floor_count == 0 is an error.
std::array<double, kNumEmotions> emotion_class_weights(const Dataset& train,
                                                       std::int64_t floor_count = 1);
std::array<double, kNumEmotions> emotion_class_weights(const EmotionCounts& counts,
                                                       std::int64_t floor_count = 1);

// 1 at every utterance that is the cause in at least one gold pair (0-based positions).
std::vector<int> derive_cause_labels(const Conversation& conversation);

// Gold emotions as indices, 0-based positions. Throws if any utterance is unlabeled.
std::vector<int> emotion_labels(const Conversation& conversation);

} // namespace ecpe
