#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvmt/clinical_data.hpp"
#include "mvmt/errors.hpp"
#include "mvmt/trainer.hpp"

namespace mvmt {

/// Parsed run configuration: the synthetic data section and the trainer
/// section, each strictly validated against its known keys.
struct RunConfig {
    SyntheticSpec data;
    bool has_data = false;
    TrainerConfig trainer;
};

RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);
nlohmann::json trainer_config_to_json(const TrainerConfig& config);

struct GenerateOptions {
    std::filesystem::path config_path;
    std::filesystem::path out_dir;
    bool force = false;
};
void cmd_generate(const GenerateOptions& options);

struct ValidateOptions {
    std::filesystem::path bundle_dir;
};
/// Loads and fully validates a bundle; returns a one-line summary.
std::string cmd_validate(const ValidateOptions& options);

struct TrainOptions {
    std::filesystem::path bundle_dir;
    std::filesystem::path config_path;
    std::filesystem::path out_dir;
    std::optional<std::string> variant;
    std::optional<std::size_t> epochs;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::optional<std::size_t> folds;
    std::optional<bool> single_split;
    bool resume = false;
    bool force = false;
};
void cmd_train(const TrainOptions& options);

struct EvaluateOptions {
    std::vector<std::filesystem::path> checkpoints;
    std::filesystem::path bundle_dir;
    std::optional<std::filesystem::path> out_file; // stdout when absent
};
nlohmann::json cmd_evaluate(const EvaluateOptions& options);

struct ExplainOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path bundle_dir;
    std::string task;
    bool global = false;
    std::optional<std::string> patient_id;
    std::size_t top_k = 10;
    std::optional<std::string> ablate; // "visits=3,9;codes=D0002,M0005"
    std::optional<std::filesystem::path> out_dir;
};
nlohmann::json cmd_explain(const ExplainOptions& options);

/// Exit code for a raised error: 2 config, 3 data, 4 divergence, 5 undefined
/// metric, 1 anything else.
int exit_code_for(ErrorKind kind);

} // namespace mvmt
