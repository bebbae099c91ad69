#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "posekit/data.hpp"
#include "posekit/train.hpp"

namespace posekit {

// JSON <-> config structs. File loaders are strict: an unknown key raises a
// ConfigError naming it.
nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json training_config_to_json(const TrainingConfig& cfg);
TrainingConfig training_config_from_json(const nlohmann::json& j);

nlohmann::json synth_config_to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

// {"model": {...}, "training": {...}}; both sections optional, defaults apply.
TrainingConfig load_training_config_file(const std::filesystem::path& path);
SynthConfig load_synth_config_file(const std::filesystem::path& path);

}  // namespace posekit
