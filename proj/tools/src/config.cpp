#include "ecpe_tools/config.hpp"

#include <fstream>

namespace ecpe::cli {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

namespace {

ordered default_document()
{
    return ordered::parse(R"({
  "seed": 0,
  "paths": {
    "dataset": "",
    "val_dataset": "",
    "text_embeddings": "",
    "audio_embeddings": "",
    "video_embeddings": "",
    "output_dir": "runs/default"
  },
  "split": {"val_fraction": 0.1},
  "features": {"embedding_dropout": 0.3},
  "optimizer": {
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
    "weight_decay": 0.01,
    "warmup_fraction": 0.1
  },
  "emotion": {
    "variant": "bilstm",
    "hidden": 256,
    "layers": 4,
    "inter_layer_dropout": 0.3,
    "epochs": 60,
    "lr": 0.001,
    "batch_size": 64,
    "crf_decode": "viterbi",
    "class_weight_floor": 1
  },
  "cause": {
    "variant": "bilstm",
    "hidden": 256,
    "layers": 3,
    "inter_layer_dropout": 0.3,
    "epochs": 40,
    "lr": 0.001,
    "batch_size": 64,
    "threshold": 0.5
  },
  "pairing": {
    "epochs": 40,
    "lr": 0.001,
    "batch_size": 64,
    "negative_ratio": 5,
    "max_distance": 12,
    "distance_dim": 32,
    "threshold": 0.5
  },
  "synthetic": {
    "conversations": 200,
    "held_out_conversations": 50,
    "min_length": 5,
    "max_length": 15,
    "text_dim": 16,
    "audio_dim": 8,
    "video_dim": 8,
    "noise_sigma": 0.1
  }
})");
}

void collect_leaves(const ordered& node, const std::string& prefix, std::vector<std::string>& out)
{
    for (const auto& [key, value] : node.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (value.is_object()) {
            collect_leaves(value, path, out);
        } else {
            out.push_back(path);
        }
    }
}

bool compatible(const json& def, const json& v)
{
    if (def.is_number_unsigned()) {
        return v.is_number_unsigned();
    }
    if (def.is_number()) {
        return v.is_number() && (!def.is_number_integer() || v.is_number_integer());
    }
    return def.type() == v.type();
}

void overlay(json& target, const json& src, const std::string& prefix)
{
    if (!src.is_object()) {
        throw UsageError("config" + (prefix.empty() ? "" : " section '" + prefix + "'") + " must be an object");
    }
    for (const auto& [key, value] : src.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        auto it = target.find(key);
        if (it == target.end()) {
            throw UsageError("unknown config key '" + path + "'");
        }
        if (it->is_object()) {
            overlay(*it, value, path);
        } else if (!compatible(*it, value)) {
            throw UsageError("config key '" + path + "' expects " + std::string(it->type_name()) + ", got " +
                             std::string(value.type_name()));
        } else {
            *it = value;
        }
    }
}

template <typename T>
T get(const json& v, const char* section, const char* key)
{
    return v.at(section).at(key).get<T>();
}

} // namespace

json default_config_json()
{
    return json(default_document());
}

std::vector<std::string> config_leaves()
{
    std::vector<std::string> out;
    collect_leaves(default_document(), "", out);
    return out;
}

ExperimentConfig ExperimentConfig::defaults()
{
    return {default_config_json()};
}

ExperimentConfig ExperimentConfig::from_json(const json& overrides)
{
    ExperimentConfig c = defaults();
    overlay(c.values, overrides, "");
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot open config " + path.string());
    }
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
    }
}

void ExperimentConfig::set(const std::string& dotted_key, const std::string& value)
{
    json* leaf = &values;
    std::size_t begin = 0;
    while (true) {
        const std::size_t dot = dotted_key.find('.', begin);
        const std::string part = dotted_key.substr(begin, dot - begin);
        if (!leaf->is_object() || !leaf->contains(part)) {
            throw UsageError("unknown config key '" + dotted_key + "'");
        }
        leaf = &(*leaf)[part];
        if (dot == std::string::npos) {
            break;
        }
        begin = dot + 1;
    }
    if (leaf->is_object()) {
        throw UsageError("config key '" + dotted_key + "' is a section, not a value");
    }
    if (leaf->is_string()) {
        *leaf = value;
        return;
    }
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        throw UsageError("config key '" + dotted_key + "' expects " + std::string(leaf->type_name()) +
                         ", got '" + value + "'");
    }
    if (!compatible(*leaf, parsed)) {
        throw UsageError("config key '" + dotted_key + "' expects " + std::string(leaf->type_name()) +
                         ", got '" + value + "'");
    }
    *leaf = parsed;
}

std::uint64_t ExperimentConfig::seed() const
{
    return values.at("seed").get<std::uint64_t>();
}

std::filesystem::path ExperimentConfig::output_dir() const
{
    return path("output_dir");
}

std::filesystem::path ExperimentConfig::path(const char* key) const
{
    return values.at("paths").at(key).get<std::string>();
}

EmotionModelConfig ExperimentConfig::emotion_model(Index input_width) const
{
    EmotionModelConfig c;
    c.variant = parse_emotion_variant(get<std::string>(values, "emotion", "variant"));
    c.input_width = input_width;
    c.hidden = get<Index>(values, "emotion", "hidden");
    c.num_layers = get<int>(values, "emotion", "layers");
    c.embedding_dropout = get<double>(values, "features", "embedding_dropout");
    c.inter_layer_dropout = get<double>(values, "emotion", "inter_layer_dropout");
    const auto decode = get<std::string>(values, "emotion", "crf_decode");
    if (decode == "viterbi") {
        c.decode = CrfDecode::viterbi;
    } else if (decode == "marginal") {
        c.decode = CrfDecode::marginal;
    } else {
        throw UsageError("emotion.crf_decode must be 'viterbi' or 'marginal', got '" + decode + "'");
    }
    return c;
}

CauseModelConfig ExperimentConfig::cause_model(Index input_width) const
{
    CauseModelConfig c;
    c.variant = parse_cause_variant(get<std::string>(values, "cause", "variant"));
    c.input_width = input_width;
    c.hidden = get<Index>(values, "cause", "hidden");
    c.num_layers = get<int>(values, "cause", "layers");
    c.embedding_dropout = get<double>(values, "features", "embedding_dropout");
    c.inter_layer_dropout = get<double>(values, "cause", "inter_layer_dropout");
    c.threshold = get<double>(values, "cause", "threshold");
    return c;
}

PairingModelConfig ExperimentConfig::pairing_model(Index emotion_width, Index cause_width) const
{
    PairingModelConfig c;
    c.emotion_rep_width = emotion_width;
    c.cause_rep_width = cause_width;
    c.max_distance = get<int>(values, "pairing", "max_distance");
    c.distance_dim = get<Index>(values, "pairing", "distance_dim");
    c.threshold = get<double>(values, "pairing", "threshold");
    return c;
}

TrainOptions ExperimentConfig::train_options(const std::string& stage) const
{
    TrainOptions o;
    const json& s = values.at(stage);
    o.epochs = s.at("epochs").get<int>();
    o.batch_size = s.at("batch_size").get<int>();
    o.optimizer.lr = s.at("lr").get<double>();
    o.optimizer.beta1 = get<double>(values, "optimizer", "beta1");
    o.optimizer.beta2 = get<double>(values, "optimizer", "beta2");
    o.optimizer.eps = get<double>(values, "optimizer", "eps");
    o.optimizer.weight_decay = get<double>(values, "optimizer", "weight_decay");
    o.warmup_fraction = get<double>(values, "optimizer", "warmup_fraction");
    o.seed = seed();
    if (stage == "pairing") {
        o.negative_ratio = s.at("negative_ratio").get<int>();
    }
    return o;
}

ModalityDims ExperimentConfig::synthetic_dims() const
{
    return {get<int>(values, "synthetic", "text_dim"), get<int>(values, "synthetic", "audio_dim"),
            get<int>(values, "synthetic", "video_dim")};
}

} // namespace ecpe::cli
