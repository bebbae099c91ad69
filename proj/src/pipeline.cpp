#include "posekit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "posekit/errors.hpp"

namespace posekit {

using ad::Var;

namespace {

Pose pose_from_vars(const Var& xy, const Var& conf, Frame frame) {
  Pose p;
  p.frame = frame;
  const int n = xy.val().dim(1);
  p.joints.resize(n);
  for (int k = 0; k < n; ++k)
    p.joints[k] = {xy.val().at2(0, k), xy.val().at2(1, k), conf.val().at2(0, k)};
  return p;
}

double mean_confidence(const Pose& p) {
  if (p.joints.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& j : p.joints) acc += j.confidence;
  return acc / p.size();
}

}  // namespace

std::vector<InstanceResult> infer_dataset(const PoseModel& model, const Dataset& dataset,
                                          bool couple_graph) {
  if (dataset.skeleton.num_joints != model.config().num_joints())
    throw DataError("dataset skeleton does not match the model");
  std::vector<InstanceResult> results;
  for (std::size_t ri = 0; ri < dataset.records.size(); ++ri) {
    const DatasetRecord& rec = dataset.records[ri];
    if (rec.instances.empty()) continue;
    const ImageF img = load_record_image(dataset, rec, model.config().in_channels);

    Tape tape(false);
    std::vector<TraceVars> traces;
    std::vector<InstanceResult> local;
    for (std::size_t ii = 0; ii < rec.instances.size(); ++ii) {
      const Instance& inst = rec.instances[ii];
      Crop crop = crop_instance(img, inst.box, model.config().crop_size);
      const TraceVars trace = model.forward(tape, tape.constant(crop.pixels.pixels));

      InstanceResult r;
      r.image_id = rec.image_id;
      r.record_idx = static_cast<int>(ri);
      r.inst_idx = static_cast<int>(ii);
      r.expanded = crop.expanded;
      r.init_norm = pose_from_vars(trace.init.norm_xy, trace.init.conf, Frame::kNormalized);
      r.final_norm = pose_from_vars(trace.final_pose, trace.init.conf, Frame::kNormalized);
      r.gt_norm = normalize_gt(inst.gt, crop.expanded);
      r.score = mean_confidence(r.init_norm);
      traces.push_back(trace);
      local.push_back(std::move(r));
    }

    if (couple_graph) {
      std::vector<std::pair<int, int>> groups = rec.pair_groups;
      if (groups.empty()) {
        std::vector<BoundingBox> boxes;
        for (const auto& inst : rec.instances) boxes.push_back(inst.box);
        groups = pair_people(boxes);
      }
      for (auto [a, b] : groups) {
        auto [ra, rb] = model.couple_forward(
            tape, {traces[a].final_pose, traces[a].init.conf, traces[a].adapted.f3},
            {traces[b].final_pose, traces[b].init.conf, traces[b].adapted.f3});
        local[a].final_norm = pose_from_vars(ra, traces[a].init.conf, Frame::kNormalized);
        local[b].final_norm = pose_from_vars(rb, traces[b].init.conf, Frame::kNormalized);
      }
    }

    for (auto& r : local) {
      r.init_px = denormalize_pose(r.init_norm, r.expanded);
      r.final_px = denormalize_pose(r.final_norm, r.expanded);
      results.push_back(std::move(r));
    }
  }
  return results;
}

EvalReport build_eval_report(const std::vector<InstanceResult>& results, const Dataset& dataset,
                             bool target_filter) {
  EvalReport rep;
  rep.instances = static_cast<int>(results.size());

  std::vector<PredInstance> init_preds, final_preds;
  std::vector<GtEvalInstance> gts;
  std::vector<Pose> init_norms, final_norms;
  std::vector<GroundTruthPose> gt_norms;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const InstanceResult& r = results[i];
    const Instance& inst = dataset.records[r.record_idx].instances[r.inst_idx];
    init_preds.push_back({r.image_id, static_cast<int>(i), r.init_px, r.score});
    final_preds.push_back({r.image_id, static_cast<int>(i), r.final_px, r.score});
    gts.push_back({r.image_id, inst.gt, inst.area});
    init_norms.push_back(r.init_norm);
    final_norms.push_back(r.final_norm);
    gt_norms.push_back(r.gt_norm);
  }

  MapOptions opts;
  opts.oks_sigmas = dataset.skeleton.oks_sigmas;
  opts.target_filter = target_filter;
  rep.initial.ap = compute_map(init_preds, gts, opts);
  rep.final.ap = compute_map(final_preds, gts, opts);
  rep.initial.invvis = inv_vis_breakdown(init_preds, gts, dataset.skeleton.oks_sigmas);
  rep.final.invvis = inv_vis_breakdown(final_preds, gts, dataset.skeleton.oks_sigmas);
  rep.initial.l1 = joint_error_stats(init_norms, gt_norms);
  rep.final.l1 = joint_error_stats(final_norms, gt_norms);
  return rep;
}

EvalReport evaluate_dataset(const PoseModel& model, const Dataset& dataset, bool couple_graph,
                            bool target_filter) {
  return build_eval_report(infer_dataset(model, dataset, couple_graph), dataset, target_filter);
}

namespace {

nlohmann::json side_to_json(const EvalSide& s) {
  nlohmann::json j;
  j["map_50_95"] = s.ap.map_50_95;
  j["ap50"] = s.ap.ap50;
  j["ap75"] = s.ap.ap75;
  j["ap80"] = s.ap.ap80;
  j["ap90"] = s.ap.ap90;
  j["inv75"] = s.invvis.inv75;
  j["inv90"] = s.invvis.inv90;
  j["vis75"] = s.invvis.vis75;
  j["vis90"] = s.invvis.vis90;
  j["inv_count"] = s.invvis.inv_count;
  j["vis_count"] = s.invvis.vis_count;
  j["inv_mean_l1"] = s.l1.inv_mean_l1;
  j["vis_mean_l1"] = s.l1.vis_mean_l1;
  return j;
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["instances"] = instances;
  j["initial"] = side_to_json(initial);
  j["final"] = side_to_json(final);
  return j;
}

std::string EvalReport::text() const {
  char buf[512];
  std::string out;
  out += "pose        mAP@.5:.95    AP50    AP75    AP80    AP90   Inv@75  Inv@90"
         "   V@75    V@90   invL1    visL1\n";
  auto row = [&](const char* name, const EvalSide& s) {
    std::snprintf(buf, sizeof(buf),
                  "%-10s %10.4f %8.4f %7.4f %7.4f %7.4f %8.4f %7.4f %7.4f %7.4f %8.5f %8.5f\n",
                  name, s.ap.map_50_95, s.ap.ap50, s.ap.ap75, s.ap.ap80, s.ap.ap90, s.invvis.inv75,
                  s.invvis.inv90, s.invvis.vis75, s.invvis.vis90, s.l1.inv_mean_l1,
                  s.l1.vis_mean_l1);
    out += buf;
  };
  row("initial", initial);
  row("final", final);
  return out;
}

// --------------------------------------------------------------------- render

namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

void put(ImageU8& img, int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  img.at(x, y, 0) = c.r;
  img.at(x, y, 1) = c.g;
  img.at(x, y, 2) = c.b;
}

void draw_line(ImageU8& img, double x0d, double y0d, double x1d, double y1d, Rgb c) {
  int x0 = static_cast<int>(std::lround(x0d)), y0 = static_cast<int>(std::lround(y0d));
  const int x1 = static_cast<int>(std::lround(x1d)), y1 = static_cast<int>(std::lround(y1d));
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    put(img, x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void draw_marker(ImageU8& img, double xd, double yd, Rgb c, bool hollow) {
  const int x = static_cast<int>(std::lround(xd)), y = static_cast<int>(std::lround(yd));
  if (hollow) {
    for (int d = -2; d <= 2; ++d) {
      put(img, x + d, y - 2, c);
      put(img, x + d, y + 2, c);
      put(img, x - 2, y + d, c);
      put(img, x + 2, y + d, c);
    }
  } else {
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) put(img, x + dx, y + dy, c);
  }
}

void draw_pose(ImageU8& img, const std::vector<Joint>& joints,
               const std::vector<std::uint8_t>& hollow, const SkeletonSpec& sk, Rgb line,
               Rgb marker) {
  for (auto [a, b] : sk.edges)
    draw_line(img, joints[a].x, joints[a].y, joints[b].x, joints[b].y, line);
  for (std::size_t k = 0; k < joints.size(); ++k)
    draw_marker(img, joints[k].x, joints[k].y, marker, hollow[k] != 0);
}

}  // namespace

std::vector<std::filesystem::path> render_overlays(const PoseModel& model, const Dataset& dataset,
                                                   const std::filesystem::path& out_dir,
                                                   bool couple_graph) {
  std::filesystem::create_directories(out_dir);
  const std::vector<InstanceResult> results = infer_dataset(model, dataset, couple_graph);

  // color legend: gt green, initial red, final blue; markers use the pure
  // color, lines a dimmer variant; invisible joints are hollow
  const Rgb kGtLine{0, 140, 0}, kGtMark{0, 255, 0};
  const Rgb kInitLine{150, 0, 0}, kInitMark{255, 0, 0};
  const Rgb kFinalLine{0, 0, 150}, kFinalMark{0, 0, 255};

  std::vector<std::filesystem::path> written;
  for (std::size_t ri = 0; ri < dataset.records.size(); ++ri) {
    const DatasetRecord& rec = dataset.records[ri];
    if (rec.instances.empty()) continue;
    ImageU8 canvas = to_u8(load_record_image(dataset, rec, 3));

    for (const auto& r : results) {
      if (r.record_idx != static_cast<int>(ri)) continue;
      const Instance& inst = rec.instances[r.inst_idx];
      std::vector<std::uint8_t> hollow(inst.gt.size());
      for (int k = 0; k < inst.gt.size(); ++k)
        hollow[k] = inst.gt.joints[k].labeled && !inst.gt.joints[k].visible ? 1 : 0;

      std::vector<Joint> gt_joints(inst.gt.size());
      for (int k = 0; k < inst.gt.size(); ++k)
        gt_joints[k] = {inst.gt.joints[k].x, inst.gt.joints[k].y, 1.0};
      draw_pose(canvas, gt_joints, hollow, dataset.skeleton, kGtLine, kGtMark);
      draw_pose(canvas, r.init_px.joints, hollow, dataset.skeleton, kInitLine, kInitMark);
      draw_pose(canvas, r.final_px.joints, hollow, dataset.skeleton, kFinalLine, kFinalMark);
    }

    char buf[48];
    std::snprintf(buf, sizeof(buf), "overlay_%06d.png", rec.image_id);
    const auto path = out_dir / buf;
    write_png(path, canvas);
    written.push_back(path);
  }
  return written;
}

}  // namespace posekit
