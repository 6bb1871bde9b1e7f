#pragma once
// The operator commands behind the `ecpe` executable. Each returns a process
// exit code; failures surface as exceptions derived from ecpe::Error.

#include "ecpe_tools/config.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>

namespace ecpe::cli {

// Line-delimited JSON records, mirrored to an optional stream and appended to
// <output_dir>/logs/<command>.jsonl when a directory is given.
class Logger {
public:
    explicit Logger(std::ostream* echo = nullptr) : echo_(echo) {}
    void open_file(const std::filesystem::path& path);
    void write(const nlohmann::json& record);

private:
    std::ostream* echo_;
    std::ofstream file_;
};

// Standard file layout under the output directory.
struct RunLayout {
    std::filesystem::path root;

    std::filesystem::path train_split() const { return root / "data" / "train.json"; }
    std::filesystem::path val_split() const { return root / "data" / "val.json"; }
    std::filesystem::path prepare_report() const { return root / "data" / "prepare_report.json"; }
    std::filesystem::path best_checkpoint(const std::string& stage) const
    {
        return root / "checkpoints" / (stage + ".ckpt");
    }
    std::filesystem::path last_checkpoint(const std::string& stage) const
    {
        return root / "checkpoints" / (stage + ".last.ckpt");
    }
    std::filesystem::path log(const std::string& command) const { return root / "logs" / (command + ".jsonl"); }
};

EmbeddingProvider load_configured_provider(const ExperimentConfig& config);

// Splits the dataset (unless a validation file is configured), checks that
// every utterance has embeddings, writes both splits and a report with the
// emotion histogram and class weights.
int cmd_prepare(const ExperimentConfig& config, Logger& log);

struct TrainArgs {
    std::string stage;                   // emotion | cause | pairing
    std::optional<std::string> variant;  // overrides <stage>.variant
    bool resume = false;
};
int cmd_train(ExperimentConfig config, const TrainArgs& args, Logger& log);

struct PredictArgs {
    std::filesystem::path input;
    std::filesystem::path output;
    // Default to the best checkpoints under the output directory.
    std::optional<std::filesystem::path> emotion_checkpoint;
    std::optional<std::filesystem::path> cause_checkpoint;
    std::optional<std::filesystem::path> pairing_checkpoint;
};
int cmd_predict(const ExperimentConfig& config, const PredictArgs& args, Logger& log);

// Writes the report to `output` when given and returns it.
nlohmann::json cmd_evaluate(const std::filesystem::path& gold, const std::filesystem::path& predicted,
                            const std::optional<std::filesystem::path>& output, Logger& log);

// CRF brute-force oracles, gradient checks and metric fixtures. Returns 0 when
// every check passes, 1 otherwise.
int cmd_selfcheck(Logger& log);

// Writes a planted-rule synthetic dataset (dataset.json), an optional held-out
// set (test.json), embedding files covering both, and a config.json whose
// paths point at them.
int cmd_synth(ExperimentConfig& config, const std::filesystem::path& dir, Logger& log);

} // namespace ecpe::cli
