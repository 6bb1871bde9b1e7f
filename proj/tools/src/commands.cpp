#include "ecpe_tools/commands.hpp"

#include "ecpe/checkpoint.hpp"
#include "ecpe/synthetic.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

namespace ecpe::cli {

using nlohmann::json;
namespace fs = std::filesystem;

void Logger::open_file(const fs::path& path)
{
    fs::create_directories(path.parent_path());
    file_.close();
    file_.open(path, std::ios::app);
    if (!file_) {
        throw LoadError("cannot open log file " + path.string());
    }
}

void Logger::write(const json& record)
{
    const std::string line = record.dump();
    if (echo_) {
        *echo_ << line << '\n' << std::flush;
    }
    if (file_.is_open()) {
        file_ << line << '\n' << std::flush;
    }
}

namespace {

json start_record(const std::string& command, const ExperimentConfig& config)
{
    return {{"event", "start"}, {"command", command}, {"seed", config.seed()}, {"config", config.values}};
}

fs::path required_path(const ExperimentConfig& config, const char* key)
{
    const fs::path p = config.path(key);
    if (p.empty()) {
        throw UsageError(std::string("paths.") + key + " is not set");
    }
    return p;
}

Dataset load_split(const fs::path& path, SplitTag tag)
{
    if (!fs::exists(path)) {
        throw LoadError(path.string() + " does not exist; run `ecpe prepare` first");
    }
    return load_dataset(path, tag);
}

json histogram_json(const EmotionCounts& counts)
{
    json out = json::object();
    for (Emotion e : kAllEmotions) {
        out[std::string(emotion_name(e))] = counts[static_cast<std::size_t>(emotion_index(e))];
    }
    return out;
}

Vector weights_vector(const std::array<double, kNumEmotions>& w)
{
    Vector v(kNumEmotions);
    for (int i = 0; i < kNumEmotions; ++i) {
        v(i) = w[static_cast<std::size_t>(i)];
    }
    return v;
}

std::uint64_t stage_tag(const std::string& stage)
{
    if (stage == "emotion") return 1;
    if (stage == "cause") return 2;
    return 3;
}

json stage_metrics_json(const eval::StageMetrics& m)
{
    return {{"weighted_precision", m.weighted_precision},
            {"weighted_recall", m.weighted_recall},
            {"weighted_f1", m.weighted_f1},
            {"macro_f1", m.macro_f1},
            {"accuracy", m.accuracy}};
}

// Runs the epochs left in `trainer`, keeping the best-validation checkpoint
// and a last checkpoint that carries optimizer state.
void run_training(Trainer& trainer, const TrainOptions& options, const std::string& stage,
                  const std::function<Checkpoint()>& snapshot, const ExperimentConfig& config,
                  const RunLayout& layout, double best, Logger& log)
{
    const auto started = std::chrono::steady_clock::now();
    while (trainer.epochs_done() < options.epochs) {
        const EpochReport r = trainer.run_epoch();
        json rec = {{"event", "epoch"},   {"stage", stage},     {"epoch", r.epoch},
                    {"step", r.step},     {"lr", r.lr},         {"train_loss", r.train_loss}};
        if (r.has_val) {
            rec["val"] = stage_metrics_json(r.val);
        }
        // Without a validation set the lowest training loss counts as best.
        const double metric = r.has_val ? r.val.weighted_f1 : -r.train_loss;

        Checkpoint ckpt = snapshot();
        ckpt.config["experiment"] = config.values;
        ckpt.config["epoch"] = r.epoch;
        if (metric > best) {
            best = metric;
            save_checkpoint(layout.best_checkpoint(stage), ckpt);
            rec["best"] = true;
        }
        ckpt.config["best_metric"] = best;
        trainer.save_state(ckpt);
        save_checkpoint(layout.last_checkpoint(stage), ckpt);

        rec["elapsed_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        log.write(rec);
    }
}

template <typename Model>
Model resume_model(const Checkpoint& last, const json& expected_config)
{
    Model model = Model::from_checkpoint(last);
    if (model.config().to_json() != expected_config) {
        throw UsageError("cannot resume: checkpoint model config " + model.config().to_json().dump() +
                         " differs from the configured " + expected_config.dump());
    }
    return model;
}

} // namespace

EmbeddingProvider load_configured_provider(const ExperimentConfig& config)
{
    return load_provider(required_path(config, "text_embeddings"), required_path(config, "audio_embeddings"),
                         required_path(config, "video_embeddings"));
}

int cmd_prepare(const ExperimentConfig& config, Logger& log)
{
    const RunLayout layout{config.output_dir()};
    log.open_file(layout.log("prepare"));
    log.write(start_record("prepare", config));

    const Dataset full = load_dataset(required_path(config, "dataset"));
    if (full.conversations.empty()) {
        throw ValidationError("dataset " + config.path("dataset").string() + " has no conversations");
    }
    Dataset train, val;
    if (config.path("val_dataset").empty()) {
        std::tie(train, val) =
            split_train_val(full, config.values.at("split").at("val_fraction").get<double>(), config.seed());
    } else {
        train = full;
        val = load_dataset(config.path("val_dataset"), SplitTag::val);
    }

    const EmbeddingProvider provider = load_configured_provider(config);
    provider.require_complete(train);
    provider.require_complete(val);

    const EmotionCounts counts = emotion_histogram(train);
    const auto floor = config.values.at("emotion").at("class_weight_floor").get<std::int64_t>();
    const auto weights = emotion_class_weights(counts, floor);
    json weights_json = json::object();
    for (Emotion e : kAllEmotions) {
        weights_json[std::string(emotion_name(e))] = weights[static_cast<std::size_t>(emotion_index(e))];
    }
    const auto modal = std::max_element(counts.begin(), counts.end()) - counts.begin();

    fs::create_directories(layout.train_split().parent_path());
    save_dataset(layout.train_split(), train);
    save_dataset(layout.val_split(), val);

    const json report = {{"train_conversations", train.conversations.size()},
                         {"train_utterances", train.num_utterances()},
                         {"val_conversations", val.conversations.size()},
                         {"val_utterances", val.num_utterances()},
                         {"embedding_dims", {{"text", provider.dims().text},
                                             {"audio", provider.dims().audio},
                                             {"video", provider.dims().video}}},
                         {"emotion_histogram", histogram_json(counts)},
                         {"modal_emotion", std::string(emotion_name(emotion_from_index(static_cast<int>(modal))))},
                         {"class_weights", weights_json}};
    std::ofstream(layout.prepare_report()) << report.dump(2) << '\n';
    log.write({{"event", "prepared"}, {"report", report}});
    return 0;
}

int cmd_train(ExperimentConfig config, const TrainArgs& args, Logger& log)
{
    const std::string& stage = args.stage;
    if (stage != "emotion" && stage != "cause" && stage != "pairing") {
        throw UsageError("unknown stage '" + stage + "' (expected emotion, cause or pairing)");
    }
    if (args.variant) {
        if (stage == "pairing") {
            throw UsageError("the pairing stage has no variants");
        }
        config.set(stage + ".variant", *args.variant);
    }

    const RunLayout layout{config.output_dir()};
    log.open_file(layout.log("train_" + stage));
    log.write(start_record("train", config));

    const Dataset train = load_split(layout.train_split(), SplitTag::train);
    const Dataset val = load_split(layout.val_split(), SplitTag::val);
    const EmbeddingProvider provider = load_configured_provider(config);
    provider.require_complete(train);
    provider.require_complete(val);

    const TrainOptions options = config.train_options(stage);
    Rng init_rng = derive_rng(config.seed(), {stage_tag(stage), 0x1417});
    std::optional<Checkpoint> last;
    double best = -std::numeric_limits<double>::infinity();
    if (args.resume) {
        last = load_checkpoint(layout.last_checkpoint(stage));
        best = last->config.value("best_metric", best);
    }
    auto finish = [&](Trainer& trainer, const std::function<Checkpoint()>& snapshot) {
        if (last) {
            trainer.restore_state(*last);
            log.write({{"event", "resumed"}, {"stage", stage}, {"epoch", trainer.epochs_done()}});
        }
        run_training(trainer, options, stage, snapshot, config, layout, best, log);
        log.write({{"event", "done"},
                   {"stage", stage},
                   {"best_checkpoint", layout.best_checkpoint(stage).string()},
                   {"last_checkpoint", layout.last_checkpoint(stage).string()}});
        return 0;
    };

    if (stage == "emotion") {
        const EmotionModelConfig mc = config.emotion_model(provider.width());
        EmotionModel model = last ? resume_model<EmotionModel>(*last, mc.to_json()) : EmotionModel(mc);
        if (!last) {
            model.init(init_rng);
        }
        const auto floor = config.values.at("emotion").at("class_weight_floor").get<std::int64_t>();
        Vector weights = weights_vector(emotion_class_weights(train, floor));
        log.write({{"event", "class_weights"}, {"weights", std::vector<double>(weights.data(), weights.data() + 7)}});
        Trainer trainer(emotion_task(model, emotion_examples(train, provider), emotion_examples(val, provider),
                                     std::move(weights), options),
                        options);
        return finish(trainer, [&model] { return model.to_checkpoint(); });
    }
    if (stage == "cause") {
        const CauseModelConfig mc = config.cause_model(provider.width());
        CauseModel model = last ? resume_model<CauseModel>(*last, mc.to_json()) : CauseModel(mc);
        if (!last) {
            model.init(init_rng);
        }
        Trainer trainer(cause_task(model, cause_examples(train, provider), cause_examples(val, provider), options),
                        options);
        return finish(trainer, [&model] { return model.to_checkpoint(); });
    }

    const EmotionModel emotion = EmotionModel::from_checkpoint(load_checkpoint(layout.best_checkpoint("emotion")));
    const CauseModel cause = CauseModel::from_checkpoint(load_checkpoint(layout.best_checkpoint("cause")));
    if (emotion.config().input_width != provider.width() || cause.config().input_width != provider.width()) {
        throw ShapeError("stage checkpoints expect feature width " + std::to_string(emotion.config().input_width) +
                         "/" + std::to_string(cause.config().input_width) + ", embeddings have " +
                         std::to_string(provider.width()));
    }
    const PairingModelConfig mc = config.pairing_model(emotion.representation_width(), cause.representation_width());
    PairingModel model = last ? resume_model<PairingModel>(*last, mc.to_json()) : PairingModel(mc);
    if (!last) {
        model.init(init_rng);
    }
    Trainer trainer(pairing_task(model, train, compute_representations(emotion, cause, train, provider), val,
                                 compute_representations(emotion, cause, val, provider), options),
                    options);
    return finish(trainer, [&model] { return model.to_checkpoint(); });
}

int cmd_predict(const ExperimentConfig& config, const PredictArgs& args, Logger& log)
{
    const RunLayout layout{config.output_dir()};
    log.open_file(layout.log("predict"));
    log.write(start_record("predict", config));

    const auto pick = [&](const std::optional<fs::path>& given, const std::string& stage) {
        return given ? *given : layout.best_checkpoint(stage);
    };
    const EmotionModel emotion = EmotionModel::from_checkpoint(load_checkpoint(pick(args.emotion_checkpoint, "emotion")));
    const CauseModel cause = CauseModel::from_checkpoint(load_checkpoint(pick(args.cause_checkpoint, "cause")));
    const PairingModel pairing = PairingModel::from_checkpoint(load_checkpoint(pick(args.pairing_checkpoint, "pairing")));
    check_compatible(emotion, cause, pairing);

    const Dataset input = load_dataset(args.input, SplitTag::test);
    std::size_t pairs = 0;
    Dataset output;
    if (input.conversations.empty()) {
        output = input;
    } else {
        const EmbeddingProvider provider = load_configured_provider(config);
        provider.require_complete(input);
        output = predict_dataset(emotion, cause, pairing, input, provider);
        for (const auto& c : output.conversations) {
            pairs += c.gold_pairs ? c.gold_pairs->size() : 0;
        }
    }
    if (args.output.has_parent_path()) {
        fs::create_directories(args.output.parent_path());
    }
    save_dataset(args.output, output);
    log.write({{"event", "predicted"},
               {"conversations", output.conversations.size()},
               {"pairs", pairs},
               {"output", args.output.string()}});
    return 0;
}

json cmd_evaluate(const fs::path& gold, const fs::path& predicted, const std::optional<fs::path>& output,
                  Logger& log)
{
    const json report = eval::score_datasets(load_dataset(gold, SplitTag::test), load_dataset(predicted, SplitTag::test));
    if (output) {
        if (output->has_parent_path()) {
            fs::create_directories(output->parent_path());
        }
        std::ofstream(*output) << report.dump(2) << '\n';
    }
    log.write({{"event", "evaluated"}, {"gold", gold.string()}, {"predicted", predicted.string()}, {"report", report}});
    return report;
}

int cmd_synth(ExperimentConfig& config, const fs::path& dir, Logger& log)
{
    const json& s = config.values.at("synthetic");
    const int train_count = s.at("conversations").get<int>();
    const int held_out = s.at("held_out_conversations").get<int>();
    SyntheticCorpusOptions options;
    options.num_conversations = train_count + held_out;
    options.min_length = s.at("min_length").get<int>();
    options.max_length = s.at("max_length").get<int>();
    options.seed = config.seed();
    Dataset dataset = synthesize_dataset(options);
    const PlantedRule rule{s.at("noise_sigma").get<double>(), true};
    const EmbeddingProvider provider =
        synthetic_provider(derive_rng(config.seed(), {0xE3})(), config.synthetic_dims(), dataset, rule);

    Dataset test;
    test.split_tag = SplitTag::test;
    test.conversations.assign(dataset.conversations.begin() + train_count, dataset.conversations.end());
    dataset.conversations.resize(static_cast<std::size_t>(train_count));

    fs::create_directories(dir);
    const fs::path dataset_path = dir / "dataset.json";
    save_dataset(dataset_path, dataset);
    if (held_out > 0) {
        save_dataset(dir / "test.json", test);
    }
    for (Modality m : {Modality::text, Modality::audio, Modality::video}) {
        const std::string name(modality_name(m));
        const fs::path p = dir / (name + ".emb");
        save_precomputed(p, provider.table(m));
        config.set("paths." + name + "_embeddings", fs::absolute(p).string());
    }
    config.set("paths.dataset", fs::absolute(dataset_path).string());
    const fs::path config_path = dir / "config.json";
    std::ofstream(config_path) << config.values.dump(2) << '\n';
    log.write({{"event", "synthesized"},
               {"conversations", dataset.conversations.size()},
               {"utterances", dataset.num_utterances()},
               {"held_out_conversations", test.conversations.size()},
               {"config", config_path.string()}});
    return 0;
}

} // namespace ecpe::cli
