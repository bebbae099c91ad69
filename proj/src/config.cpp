#include "posekit/config.hpp"

#include <fstream>
#include <set>

#include "posekit/errors.hpp"

namespace posekit {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown config key '" + key + "'");
}

SkeletonSpec skeleton_from_config(const json& j) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "ocpose12") return SkeletonSpec::ocpose12();
    // any other string is a path to a skeleton JSON document
    std::ifstream in(name);
    if (!in) throw ConfigError("skeleton: unknown name or unreadable file '" + name + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return skeleton_from_json(text);
  }
  return skeleton_from_json(j.dump());
}

}  // namespace

json model_config_to_json(const ModelConfig& cfg) {
  json j;
  j["crop_size"] = cfg.crop_size;
  j["in_channels"] = cfg.in_channels;
  j["encoder_channels"] = cfg.encoder_channels;
  j["f2_channels"] = cfg.f2_channels;
  j["f3_channels"] = cfg.f3_channels;
  j["embed_channels"] = cfg.embed_channels;
  j["block_channels"] = cfg.block_channels;
  j["skeleton"] = json::parse(skeleton_to_json(cfg.skeleton));
  j["skeleton"]["name"] = cfg.skeleton.name;
  j["ablation"] = {{"image_guided", cfg.ablation.image_guided},
                   {"progressive", cfg.ablation.progressive},
                   {"multi_scale_features", cfg.ablation.multi_scale_features},
                   {"cfa_enabled", cfg.ablation.cfa_enabled},
                   {"fusion_enabled", cfg.ablation.fusion_enabled}};
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  check_keys(j, {"crop_size", "in_channels", "encoder_channels", "f2_channels", "f3_channels",
                 "embed_channels", "block_channels", "skeleton", "ablation"},
             "model");
  ModelConfig cfg;
  cfg.crop_size = j.value("crop_size", cfg.crop_size);
  cfg.in_channels = j.value("in_channels", cfg.in_channels);
  if (j.contains("encoder_channels")) {
    const auto v = j.at("encoder_channels").get<std::vector<int>>();
    if (v.size() != 3) throw ConfigError("model: encoder_channels must list three stages");
    cfg.encoder_channels = {v[0], v[1], v[2]};
  }
  cfg.f2_channels = j.value("f2_channels", cfg.f2_channels);
  cfg.f3_channels = j.value("f3_channels", cfg.f3_channels);
  cfg.embed_channels = j.value("embed_channels", cfg.embed_channels);
  cfg.block_channels = j.value("block_channels", cfg.block_channels);
  if (j.contains("skeleton")) cfg.skeleton = skeleton_from_config(j.at("skeleton"));
  if (j.contains("ablation")) {
    const json& a = j.at("ablation");
    check_keys(a, {"image_guided", "progressive", "multi_scale_features", "cfa_enabled",
                   "fusion_enabled"},
               "model.ablation");
    cfg.ablation.image_guided = a.value("image_guided", true);
    cfg.ablation.progressive = a.value("progressive", true);
    cfg.ablation.multi_scale_features = a.value("multi_scale_features", true);
    cfg.ablation.cfa_enabled = a.value("cfa_enabled", true);
    cfg.ablation.fusion_enabled = a.value("fusion_enabled", true);
  }
  cfg.validate();
  return cfg;
}

json training_config_to_json(const TrainingConfig& cfg) {
  json j;
  j["lambdas"] = cfg.lambdas;
  j["learning_rate"] = cfg.learning_rate;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["couple_graph_enabled"] = cfg.couple_graph_enabled;
  j["flip_augment"] = cfg.flip_augment_enabled;
  j["proposal_filter"] = cfg.proposal_filter;
  return j;
}

TrainingConfig training_config_from_json(const json& j) {
  check_keys(j, {"lambdas", "learning_rate", "epochs", "batch_size", "seed",
                 "couple_graph_enabled", "flip_augment", "proposal_filter"},
             "training");
  TrainingConfig cfg;
  if (j.contains("lambdas")) {
    const auto v = j.at("lambdas").get<std::vector<double>>();
    if (v.size() != 3) throw ConfigError("training: lambdas must list three weights");
    cfg.lambdas = {v[0], v[1], v[2]};
  }
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.couple_graph_enabled = j.value("couple_graph_enabled", cfg.couple_graph_enabled);
  cfg.flip_augment_enabled = j.value("flip_augment", cfg.flip_augment_enabled);
  cfg.proposal_filter = j.value("proposal_filter", cfg.proposal_filter);
  return cfg;
}

json synth_config_to_json(const SynthConfig& cfg) {
  json j;
  j["num_images"] = cfg.num_images;
  j["image_size"] = cfg.image_size;
  j["occlusion_rate"] = cfg.occlusion_rate;
  j["scale_min"] = cfg.scale_min;
  j["scale_max"] = cfg.scale_max;
  j["thickness_min"] = cfg.thickness_min;
  j["thickness_max"] = cfg.thickness_max;
  j["seed"] = cfg.seed;
  j["skeleton"] = json::parse(skeleton_to_json(cfg.skeleton));
  return j;
}

SynthConfig synth_config_from_json(const json& j) {
  check_keys(j, {"num_images", "image_size", "occlusion_rate", "scale_min", "scale_max",
                 "thickness_min", "thickness_max", "seed", "skeleton"},
             "synth");
  SynthConfig cfg;
  cfg.num_images = j.value("num_images", cfg.num_images);
  cfg.image_size = j.value("image_size", cfg.image_size);
  cfg.occlusion_rate = j.value("occlusion_rate", cfg.occlusion_rate);
  cfg.scale_min = j.value("scale_min", cfg.scale_min);
  cfg.scale_max = j.value("scale_max", cfg.scale_max);
  cfg.thickness_min = j.value("thickness_min", cfg.thickness_min);
  cfg.thickness_max = j.value("thickness_max", cfg.thickness_max);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("skeleton")) cfg.skeleton = skeleton_from_config(j.at("skeleton"));
  cfg.validate();
  return cfg;
}

namespace {

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config parse failure in " + path.string() + ": " + e.what());
  }
}

}  // namespace

TrainingConfig load_training_config_file(const std::filesystem::path& path) {
  const json j = read_config_file(path);
  check_keys(j, {"model", "training"}, "config");
  TrainingConfig cfg;
  if (j.contains("training")) cfg = training_config_from_json(j.at("training"));
  if (j.contains("model")) cfg.model = model_config_from_json(j.at("model"));
  cfg.validate();
  return cfg;
}

SynthConfig load_synth_config_file(const std::filesystem::path& path) {
  const json j = read_config_file(path);
  return synth_config_from_json(j);
}

}  // namespace posekit
