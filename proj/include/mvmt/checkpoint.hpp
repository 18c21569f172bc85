#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "mvmt/model.hpp"

namespace mvmt {

nlohmann::json param_store_to_json(const ParamStore& store);
ParamStore param_store_from_json(const nlohmann::json& j);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Checkpoint document: config echo, vocabulary hash, task names, one
/// parameter block per store (with Adam state and step counts), plus free-form
/// metadata under "extra".
nlohmann::json trained_model_to_json(const TrainedModel& model, std::uint64_t vocab_hash,
                                     const nlohmann::json& extra);

struct LoadedModel {
    TrainedModel model;
    std::uint64_t vocab_hash = 0;
    nlohmann::json extra;
};

LoadedModel trained_model_from_json(const nlohmann::json& j);

void save_checkpoint(const TrainedModel& model, std::uint64_t vocab_hash,
                     const nlohmann::json& extra, const std::filesystem::path& path);
LoadedModel load_checkpoint(const std::filesystem::path& path);

} // namespace mvmt
