#include "ecpe_tools/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

using namespace ecpe;
using namespace ecpe::cli;

int main(int argc, char** argv)
{
    CLI::App app{"Emotion-cause pair extraction in conversations"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    std::map<std::string, std::string> leaf_values;
    app.add_option("--config", config_path, "JSON experiment config");
    app.add_option("--seed", seed, "Random seed (overrides the config)");
    app.add_option("--set", sets, "Override a config value: dotted.key=value");
    for (const auto& leaf : config_leaves()) {
        if (leaf != "seed") {
            app.add_option("--" + leaf, leaf_values[leaf], "Config value " + leaf)->group("Config fields");
        }
    }

    auto* prepare = app.add_subcommand("prepare", "Split the dataset and report label statistics");

    TrainArgs train_args;
    std::string variant;
    auto* train = app.add_subcommand("train", "Train one stage model");
    train->add_option("--stage", train_args.stage, "emotion, cause or pairing")->required();
    train->add_option("--variant", variant, "dense, bilstm or bilstm_crf (emotion); dense or bilstm (cause)");
    train->add_flag("--resume", train_args.resume, "Continue from the last checkpoint");

    PredictArgs predict_args;
    std::string emotion_ckpt, cause_ckpt, pairing_ckpt;
    auto* predict = app.add_subcommand("predict", "Predict emotions and emotion-cause pairs");
    predict->add_option("--input", predict_args.input, "Dataset JSON to label")->required();
    predict->add_option("--output", predict_args.output, "Where to write predictions")->required();
    predict->add_option("--emotion-checkpoint", emotion_ckpt);
    predict->add_option("--cause-checkpoint", cause_ckpt);
    predict->add_option("--pairing-checkpoint", pairing_ckpt);

    std::string gold, predicted, report;
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold annotations");
    evaluate->add_option("--gold", gold)->required();
    evaluate->add_option("--pred", predicted)->required();
    evaluate->add_option("--output", report, "Also write the report here");

    auto* selfcheck = app.add_subcommand("selfcheck", "Run CRF oracles, gradient checks and metric fixtures");

    std::string synth_dir;
    auto* synth = app.add_subcommand("synth", "Write a planted-rule synthetic dataset and embeddings");
    synth->add_option("--dir", synth_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    Logger log(&std::cout);
    try {
        ExperimentConfig config = config_path.empty() ? ExperimentConfig::defaults() : ExperimentConfig::load(config_path);
        for (const auto& [key, value] : leaf_values) {
            if (app.count("--" + key) > 0) {
                config.set(key, value);
            }
        }
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) {
                throw UsageError("--set expects key=value, got '" + s + "'");
            }
            config.set(s.substr(0, eq), s.substr(eq + 1));
        }
        if (seed) {
            config.values["seed"] = *seed;
        }

        if (*prepare) {
            return cmd_prepare(config, log);
        }
        if (*train) {
            if (!variant.empty()) {
                train_args.variant = variant;
            }
            return cmd_train(config, train_args, log);
        }
        if (*predict) {
            if (!emotion_ckpt.empty()) predict_args.emotion_checkpoint = emotion_ckpt;
            if (!cause_ckpt.empty()) predict_args.cause_checkpoint = cause_ckpt;
            if (!pairing_ckpt.empty()) predict_args.pairing_checkpoint = pairing_ckpt;
            return cmd_predict(config, predict_args, log);
        }
        if (*evaluate) {
            cmd_evaluate(gold, predicted, report.empty() ? std::nullopt : std::optional<std::filesystem::path>(report), log);
            return 0;
        }
        if (*selfcheck) {
            return cmd_selfcheck(log);
        }
        if (*synth) {
            return cmd_synth(config, synth_dir, log);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
