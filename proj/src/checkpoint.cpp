#include "posekit/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "posekit/config.hpp"
#include "posekit/errors.hpp"

namespace posekit {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'P', 'K', 'C', 'K', 'P', 'T', '0', '1'};

void write_tensor(std::ofstream& out, const Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel()) * sizeof(double));
}

void read_tensor(std::ifstream& in, Tensor& t, const std::string& name) {
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel()) * sizeof(double));
  if (!in) throw DataError("checkpoint: truncated while reading tensor '" + name + "'");
}

json read_manifest(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a posekit checkpoint: " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw DataError("checkpoint: truncated manifest length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("checkpoint: truncated manifest");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint manifest parse failure: ") + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PoseModel& model,
                     const CheckpointMeta& meta) {
  json manifest;
  manifest["version"] = meta.version;
  manifest["epoch"] = meta.epoch;
  manifest["global_step"] = meta.global_step;
  manifest["adam_step"] = meta.adam_step;
  manifest["has_adam"] = meta.has_adam;
  manifest["model_config"] = model_config_to_json(model.config());
  if (!meta.training_config_json.empty())
    manifest["training_config"] = json::parse(meta.training_config_json);
  json tensors = json::array();
  for (const auto& p : model.params().items())
    tensors.push_back({{"name", p->name}, {"shape", p->value.shape()}});
  manifest["tensors"] = std::move(tensors);

  const std::string text = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, 8);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(len));
  for (const auto& p : model.params().items()) write_tensor(out, p->value);
  if (meta.has_adam)
    for (const auto& p : model.params().items()) {
      write_tensor(out, p->adam_m);
      write_tensor(out, p->adam_v);
    }
  if (!out) throw DataError("checkpoint write failure: " + path.string());
}

CheckpointMeta load_checkpoint(const std::filesystem::path& path, PoseModel& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const json manifest = read_manifest(in, path);

  CheckpointMeta meta;
  meta.version = manifest.value("version", 1);
  meta.epoch = manifest.value("epoch", 0);
  meta.global_step = manifest.value("global_step", 0LL);
  meta.adam_step = manifest.value("adam_step", 0LL);
  meta.has_adam = manifest.value("has_adam", false);
  if (manifest.contains("training_config"))
    meta.training_config_json = manifest.at("training_config").dump();

  const auto& tensors = manifest.at("tensors");
  const auto& items = model.params().items();
  if (tensors.size() != items.size())
    throw DataError("checkpoint: expected " + std::to_string(items.size()) + " tensors, found " +
                    std::to_string(tensors.size()) +
                    " (architecture/ablation mismatch with the configured model)");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string name = tensors[i].at("name").get<std::string>();
    const auto shape = tensors[i].at("shape").get<std::vector<int>>();
    if (name != items[i]->name)
      throw DataError("checkpoint: tensor '" + name + "' does not match model layer '" +
                      items[i]->name + "'");
    if (shape != items[i]->value.shape())
      throw DataError("checkpoint: shape mismatch for layer '" + name + "'");
  }
  for (const auto& p : items) read_tensor(in, p->value, p->name);
  if (meta.has_adam)
    for (const auto& p : items) {
      read_tensor(in, p->adam_m, p->name + ".m");
      read_tensor(in, p->adam_v, p->name + ".v");
    }
  return meta;
}

ModelConfig peek_checkpoint_model_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const json manifest = read_manifest(in, path);
  return model_config_from_json(manifest.at("model_config"));
}

}  // namespace posekit
