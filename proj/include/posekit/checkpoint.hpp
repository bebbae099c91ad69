#pragma once

#include <filesystem>
#include <string>

#include "posekit/model.hpp"

namespace posekit {

// Checkpoint file: 8-byte magic, little-endian u64 manifest length, JSON
// manifest (version, counters, model config snapshot, tensor names+shapes),
// then the raw f64 tensor data in manifest order; Adam moments follow the
// values when present. Loading validates every tensor name and shape
// against the constructed model and reports the offending layer.
struct CheckpointMeta {
  int version = 1;
  int epoch = 0;
  long long global_step = 0;
  long long adam_step = 0;
  bool has_adam = false;
  std::string training_config_json;  // optional snapshot, may be empty
};

void save_checkpoint(const std::filesystem::path& path, const PoseModel& model,
                     const CheckpointMeta& meta);
CheckpointMeta load_checkpoint(const std::filesystem::path& path, PoseModel& model);

// Reads just the model config snapshot so the caller can construct a
// matching model before loading.
ModelConfig peek_checkpoint_model_config(const std::filesystem::path& path);

}  // namespace posekit
