// posekit: two-stage occlusion-aware pose estimation at desk scale.
// Subcommands: synth, train, eval, stats, render.

#include <chrono>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "posekit/checkpoint.hpp"
#include "posekit/config.hpp"
#include "posekit/data.hpp"
#include "posekit/errors.hpp"
#include "posekit/eval.hpp"
#include "posekit/kernels.hpp"
#include "posekit/pipeline.hpp"
#include "posekit/train.hpp"

namespace pk = posekit;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

struct ManifestWriter {
  std::string command;
  std::filesystem::path out_dir;
  json config;
  std::uint64_t seed = 0;
  json inputs = json::object();
  std::vector<std::filesystem::path> outputs;
  Clock::time_point started = Clock::now();

  void add_output(const std::filesystem::path& p) { outputs.push_back(p); }

  void write() {
    json j;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = config;
    j["inputs"] = inputs;
    json outs = json::array();
    for (const auto& p : outputs) {
      if (!std::filesystem::exists(p))
        throw pk::DataError("manifest: output file missing: " + p.string());
      outs.push_back(p.string());
    }
    j["outputs"] = std::move(outs);
    j["kernels"] = pk::kernels::backend_name();
    j["wall_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started).count();
    std::ofstream f(out_dir / "manifest.json");
    if (!f) throw pk::DataError("cannot write manifest in " + out_dir.string());
    f << j.dump(1) << '\n';
  }
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw pk::DataError("cannot write " + path.string());
  f << text;
}

pk::AblationFlags apply_ablations(pk::AblationFlags flags, const std::vector<std::string>& names) {
  for (const std::string& a : names) {
    if (a == "image_guided")
      flags.image_guided = false;
    else if (a == "progressive")
      flags.progressive = false;
    else if (a == "multi_scale")
      flags.multi_scale_features = false;
    else if (a == "cfa")
      flags.cfa_enabled = false;
    else if (a == "fusion")
      flags.fusion_enabled = false;
    else
      throw pk::ConfigError("unknown ablation '" + a +
                            "' (expected image_guided, progressive, multi_scale, cfa, fusion)");
  }
  return flags;
}

int run_synth(const std::string& config_path, const std::string& out,
              const std::vector<std::string>& overrides) {
  pk::SynthConfig cfg;
  if (!config_path.empty()) cfg = pk::load_synth_config_file(config_path);
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) throw pk::ConfigError("synth --set expects key=value");
    const std::string key = ov.substr(0, eq), val = ov.substr(eq + 1);
    json patch = pk::synth_config_to_json(cfg);
    if (!patch.contains(key)) throw pk::ConfigError("synth: unknown config key '" + key + "'");
    patch[key] = json::parse(val, nullptr, false).is_discarded() ? json(val) : json::parse(val);
    cfg = pk::synth_config_from_json(patch);
  }
  ManifestWriter m{"synth", out, pk::synth_config_to_json(cfg), cfg.seed};
  const pk::SynthResult result = pk::synth_generate(cfg);
  pk::synth_write(result, out);
  m.add_output(std::filesystem::path(out) / "annotations.json");
  for (const auto& rec : result.dataset.records)
    m.add_output(std::filesystem::path(out) / rec.file_name);
  m.write();
  std::cout << "wrote " << result.dataset.records.size() << " images to " << out << "\n";
  const pk::OcclusionStats st = pk::occlusion_stats(result.dataset);
  std::cout << st.table_row("synth") << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& dataset_path,
              const std::string& out, std::uint64_t seed_override, bool has_seed,
              bool couple_graph, const std::vector<std::string>& ablations,
              const std::string& resume) {
  pk::TrainingConfig cfg;
  if (!config_path.empty()) cfg = pk::load_training_config_file(config_path);
  if (has_seed) cfg.seed = seed_override;
  if (couple_graph) cfg.couple_graph_enabled = true;
  cfg.model.ablation = apply_ablations(cfg.model.ablation, ablations);
  cfg.validate();

  const pk::Dataset dataset = pk::load_dataset(dataset_path);
  ManifestWriter m{"train", out, json{{"model", pk::model_config_to_json(cfg.model)},
                                      {"training", pk::training_config_to_json(cfg)}},
                   cfg.seed};
  m.inputs["dataset"] = dataset_path;
  if (!resume.empty()) m.inputs["resume"] = resume;

  pk::PoseModel model(cfg.model, cfg.seed);
  const pk::TrainResult result = pk::train(model, dataset, cfg, out, resume);
  const auto loss_csv = std::filesystem::path(out) / "loss.csv";
  write_text(loss_csv, pk::loss_log_csv(result.log));
  m.add_output(loss_csv);
  for (const auto& ck : result.checkpoints) m.add_output(ck);

  if (cfg.couple_graph_enabled) {
    const pk::TrainResult couple = pk::train_couple(model, dataset, cfg, out);
    const auto couple_csv = std::filesystem::path(out) / "loss_couple.csv";
    write_text(couple_csv, pk::loss_log_csv(couple.log));
    m.add_output(couple_csv);
    for (const auto& ck : couple.checkpoints) m.add_output(ck);
  }
  m.write();
  if (!result.log.empty())
    std::cout << "final loss " << result.log.back().total << " after " << result.log.back().step
              << " steps\n";
  return 0;
}

int run_eval(const std::string& ckpt, const std::string& dataset_path, const std::string& out,
             bool couple_graph, const std::vector<std::string>& ablations, bool target_filter) {
  pk::ModelConfig mcfg = pk::peek_checkpoint_model_config(ckpt);
  mcfg.ablation = apply_ablations(mcfg.ablation, ablations);
  pk::PoseModel model(mcfg, 0);
  pk::load_checkpoint(ckpt, model);

  const pk::Dataset dataset = pk::load_dataset(dataset_path);
  std::filesystem::create_directories(out);
  ManifestWriter m{"eval", out, pk::model_config_to_json(mcfg), 0};
  m.inputs["dataset"] = dataset_path;
  m.inputs["checkpoint"] = ckpt;
  m.inputs["couple_graph"] = couple_graph;

  const pk::EvalReport report = pk::evaluate_dataset(model, dataset, couple_graph, target_filter);
  const auto report_path = std::filesystem::path(out) / "eval_report.json";
  write_text(report_path, report.to_json().dump(1) + "\n");
  const auto text_path = std::filesystem::path(out) / "eval_report.txt";
  write_text(text_path, report.text());
  m.add_output(report_path);
  m.add_output(text_path);
  m.write();
  std::cout << report.text();
  return 0;
}

int run_stats(const std::string& dataset_path, const std::string& out) {
  const pk::Dataset dataset = pk::load_dataset(dataset_path);
  const pk::OcclusionStats st = pk::occlusion_stats(dataset);
  const std::string row = st.table_row(dataset.skeleton.name);
  std::cout << "dataset       total    IoU>0.3        IoU>0.5        IoU>0.75       Average\n";
  std::cout << row << "\n";
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    ManifestWriter m{"stats", out, json::object(), 0};
    m.inputs["dataset"] = dataset_path;
    json j;
    j["total"] = st.total;
    j["above_30"] = st.above_30;
    j["above_50"] = st.above_50;
    j["above_75"] = st.above_75;
    j["average_iou"] = st.average_iou;
    j["empty"] = st.empty;
    j["row"] = row;
    const auto path = std::filesystem::path(out) / "occlusion_stats.json";
    write_text(path, j.dump(1) + "\n");
    m.add_output(path);
    m.write();
  }
  return 0;
}

int run_render(const std::string& ckpt, const std::string& dataset_path, const std::string& out,
               bool couple_graph) {
  const pk::ModelConfig mcfg = pk::peek_checkpoint_model_config(ckpt);
  pk::PoseModel model(mcfg, 0);
  pk::load_checkpoint(ckpt, model);
  const pk::Dataset dataset = pk::load_dataset(dataset_path);
  std::filesystem::create_directories(out);
  ManifestWriter m{"render", out, pk::model_config_to_json(mcfg), 0};
  m.inputs["dataset"] = dataset_path;
  m.inputs["checkpoint"] = ckpt;
  const auto written = pk::render_overlays(model, dataset, out, couple_graph);
  for (const auto& p : written) m.add_output(p);
  m.write();
  std::cout << "wrote " << written.size() << " overlays to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage occluded-pose estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path, dataset_path, out_dir, ckpt_path, resume_path;
  std::vector<std::string> ablations, synth_overrides;
  std::uint64_t seed = 0;
  bool couple_graph = false, target_filter = false;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic couple-pose dataset");
  synth->add_option("--config", config_path, "synth config JSON");
  synth->add_option("--out", out_dir, "output dataset directory")->required();
  synth->add_option("--set", synth_overrides, "override config keys, key=value");

  CLI::App* train = app.add_subcommand("train", "train the two-stage model");
  train->add_option("--config", config_path, "training config JSON");
  train->add_option("--dataset", dataset_path, "dataset directory")->required();
  train->add_option("--out", out_dir, "run output directory")->required();
  auto* seed_opt = train->add_option("--seed", seed, "seed override");
  train->add_flag("--couple-graph", couple_graph, "also train the couple refiner");
  train->add_option("--ablation", ablations,
                    "disable a component: image_guided, progressive, multi_scale, cfa, fusion");
  train->add_option("--resume", resume_path, "checkpoint to resume from");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--dataset", dataset_path, "dataset directory")->required();
  eval->add_option("--out", out_dir, "report output directory")->required();
  eval->add_flag("--couple-graph", couple_graph, "apply the couple refiner");
  eval->add_option("--ablation", ablations, "evaluate an ablated variant");
  eval->add_flag("--target-filter", target_filter, "drop background-only proposals");

  CLI::App* stats = app.add_subcommand("stats", "dataset occlusion statistics");
  stats->add_option("--dataset", dataset_path, "dataset directory")->required();
  stats->add_option("--out", out_dir, "optional output directory");

  CLI::App* render = app.add_subcommand("render", "write gt/initial/final pose overlays");
  render->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  render->add_option("--dataset", dataset_path, "dataset directory")->required();
  render->add_option("--out", out_dir, "overlay output directory")->required();
  render->add_flag("--couple-graph", couple_graph, "apply the couple refiner");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(config_path, out_dir, synth_overrides);
    if (train->parsed())
      return run_train(config_path, dataset_path, out_dir, seed, seed_opt->count() > 0,
                       couple_graph, ablations, resume_path);
    if (eval->parsed())
      return run_eval(ckpt_path, dataset_path, out_dir, couple_graph, ablations, target_filter);
    if (stats->parsed()) return run_stats(dataset_path, out_dir);
    if (render->parsed()) return run_render(ckpt_path, dataset_path, out_dir, couple_graph);
  } catch (const pk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pk::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const pk::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
