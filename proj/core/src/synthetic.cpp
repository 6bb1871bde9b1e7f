#include "ecpe/synthetic.hpp"

#include "ecpe/error.hpp"
#include "ecpe/tensor.hpp"

namespace ecpe {

Dataset synthesize_dataset(const SyntheticCorpusOptions& options)
{
    if (options.num_conversations < 0 || options.min_length < 1 ||
        options.max_length < options.min_length) {
        throw ValidationError("invalid synthetic corpus options");
    }
    static constexpr std::array<const char*, 4> kSpeakers = {"Ross", "Rachel", "Monica", "Joey"};

    Rng rng = derive_rng(options.seed, {0xC0A5});
    std::uniform_int_distribution<int> length(options.min_length, options.max_length);
    std::discrete_distribution<int> emotion(options.emotion_weights.begin(),
                                            options.emotion_weights.end());

    Dataset ds;
    ds.split_tag = SplitTag::train;
    for (int c = 0; c < options.num_conversations; ++c) {
        Conversation conv;
        conv.conversation_id = c + 1;
        const int n = length(rng);
        std::vector<EmotionCausePair> pairs;
        for (int u = 1; u <= n; ++u) {
            Utterance utt;
            utt.utterance_id = u;
            utt.speaker = kSpeakers[static_cast<std::size_t>((u - 1) % 2 + (c % 2) * 2)];
            utt.transcript = "utterance " + std::to_string(u) + " of conversation " +
                             std::to_string(conv.conversation_id);
            const Emotion e = emotion_from_index(emotion(rng));
            utt.gold_emotion = e;
            if (e != Emotion::neutral) {
                pairs.push_back({u, e, u});
                if (u > 1) {
                    pairs.push_back({u, e, u - 1});
                }
            }
            conv.utterances.push_back(std::move(utt));
        }
        conv.gold_pairs = std::move(pairs);
        ds.conversations.push_back(std::move(conv));
    }
    return ds;
}

} // namespace ecpe
