#pragma once
// Experiment configuration: one JSON document, fully defaulted. Every leaf is
// addressable by its dotted path, which is also its command-line flag name.

#include "ecpe/error.hpp"
#include "ecpe/models.hpp"
#include "ecpe/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace ecpe::cli {

class UsageError : public Error {
public:
    using Error::Error;
};

struct ExperimentConfig {
    nlohmann::json values;  // always complete; leaves match default_config_json()

    static ExperimentConfig defaults();
    // Overlays `overrides` on the defaults. Unknown keys and type mismatches
    // raise UsageError naming the dotted path.
    static ExperimentConfig from_json(const nlohmann::json& overrides);
    static ExperimentConfig load(const std::filesystem::path& path);

    // `value` is parsed as JSON when it parses, otherwise taken as a string.
    void set(const std::string& dotted_key, const std::string& value);

    std::uint64_t seed() const;
    std::filesystem::path output_dir() const;
    std::filesystem::path path(const char* key) const;  // entry of "paths"

    EmotionModelConfig emotion_model(Index input_width) const;
    CauseModelConfig cause_model(Index input_width) const;
    PairingModelConfig pairing_model(Index emotion_width, Index cause_width) const;
    TrainOptions train_options(const std::string& stage) const;
    ModalityDims synthetic_dims() const;
};

nlohmann::json default_config_json();
// Dotted paths of every leaf, in document order.
std::vector<std::string> config_leaves();

} // namespace ecpe::cli
