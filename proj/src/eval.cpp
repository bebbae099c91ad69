#include "posekit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "posekit/errors.hpp"

namespace posekit {

double compute_oks(const Pose& pred, const GroundTruthPose& gt, double area,
                   const std::vector<double>& sigmas) {
  if (pred.size() != gt.size() || static_cast<int>(sigmas.size()) != gt.size())
    throw ConfigError("compute_oks: joint count mismatch");
  if (!(area > 0.0)) throw DataError("compute_oks: non-positive object area");
  const double s2 = area;  // s = sqrt(area), only s^2 is needed
  double acc = 0.0;
  int labeled = 0;
  for (int i = 0; i < gt.size(); ++i) {
    if (!gt.joints[i].labeled) continue;
    const double dx = pred.joints[i].x - gt.joints[i].x;
    const double dy = pred.joints[i].y - gt.joints[i].y;
    const double k = 2.0 * sigmas[i];
    acc += std::exp(-(dx * dx + dy * dy) / (2.0 * s2 * k * k));
    ++labeled;
  }
  if (labeled == 0) throw DataError("compute_oks: no labeled joints");
  return acc / labeled;
}

namespace {

struct RankedPred {
  const PredInstance* pred;
  std::vector<double> oks;  // against this image's gts
  int gt_count = 0;
};

double interpolated_ap(const std::vector<double>& recall, const std::vector<double>& precision) {
  // area under the step-interpolated curve: p(r) = max precision at recall >= r
  const std::size_t n = recall.size();
  if (n == 0) return 0.0;
  std::vector<double> pmax(n);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    running = std::max(running, precision[i]);
    pmax[i] = running;
  }
  double ap = 0.0, prev_r = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_r) * pmax[i];
    prev_r = recall[i];
  }
  return ap;
}

}  // namespace

APReport compute_map(const std::vector<PredInstance>& preds,
                     const std::vector<GtEvalInstance>& gts, const MapOptions& opts) {
  if (opts.oks_sigmas.empty()) throw ConfigError("compute_map: oks_sigmas required");

  std::map<int, std::vector<const GtEvalInstance*>> gts_by_image;
  long long total_gt = 0;
  for (const auto& g : gts) {
    if (g.gt.labeled_count() == 0) continue;
    gts_by_image[g.image_id].push_back(&g);
    ++total_gt;
  }

  // precompute OKS against the home image's gts, drop background preds if asked
  std::vector<RankedPred> ranked;
  ranked.reserve(preds.size());
  for (const auto& p : preds) {
    RankedPred rp;
    rp.pred = &p;
    auto it = gts_by_image.find(p.image_id);
    if (it != gts_by_image.end()) {
      rp.gt_count = static_cast<int>(it->second.size());
      rp.oks.reserve(it->second.size());
      for (const auto* g : it->second)
        rp.oks.push_back(compute_oks(p.pose, g->gt, g->area, opts.oks_sigmas));
    }
    if (opts.target_filter) {
      double best = 0.0;
      for (double v : rp.oks) best = std::max(best, v);
      if (best <= 0.0) continue;
    }
    ranked.push_back(std::move(rp));
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedPred& a, const RankedPred& b) {
    if (a.pred->score != b.pred->score) return a.pred->score > b.pred->score;
    if (a.pred->image_id != b.pred->image_id) return a.pred->image_id < b.pred->image_id;
    return a.pred->index < b.pred->index;
  });

  APReport report;
  for (int ti = 0; ti < 10; ++ti) {
    const double t = 0.50 + 0.05 * ti;
    // greedy per-image matching in global score order; per-image score order
    // is the same restriction of the global order
    std::map<int, std::vector<bool>> gt_used;
    for (auto& [image_id, v] : gts_by_image) gt_used[image_id].assign(v.size(), false);

    PrCurve curve;
    curve.threshold = t;
    long long tp = 0, fp = 0;
    for (const auto& rp : ranked) {
      bool matched = false;
      if (rp.gt_count > 0) {
        auto& used = gt_used[rp.pred->image_id];
        int best = -1;
        double best_oks = 0.0;
        for (int gi = 0; gi < rp.gt_count; ++gi) {
          if (used[gi]) continue;
          if (rp.oks[gi] >= t && rp.oks[gi] > best_oks) {
            best_oks = rp.oks[gi];
            best = gi;
          }
        }
        if (best >= 0) {
          used[best] = true;
          matched = true;
        }
      }
      matched ? ++tp : ++fp;
      curve.recall.push_back(total_gt > 0 ? static_cast<double>(tp) / total_gt : 0.0);
      curve.precision.push_back(static_cast<double>(tp) / (tp + fp));
    }
    curve.ap = interpolated_ap(curve.recall, curve.precision);
    if (ti == 0) report.ap50 = curve.ap;
    if (ti == 5) report.ap75 = curve.ap;
    if (ti == 6) report.ap80 = curve.ap;
    if (ti == 8) report.ap90 = curve.ap;
    report.map_50_95 += curve.ap / 10.0;
    report.curves.push_back(std::move(curve));
  }
  return report;
}

OcclusionStats occlusion_stats_from_ious(const std::vector<double>& ious) {
  OcclusionStats st;
  st.total = static_cast<long long>(ious.size());
  if (ious.empty()) {
    st.empty = true;
    return st;
  }
  double acc = 0.0;
  for (double v : ious) {
    acc += v;
    st.above_30 += v > 0.3 ? 1 : 0;
    st.above_50 += v > 0.5 ? 1 : 0;
    st.above_75 += v > 0.75 ? 1 : 0;
  }
  st.average_iou = acc / st.total;
  return st;
}

OcclusionStats occlusion_stats(const Dataset& dataset) {
  std::vector<double> ious;
  for (const auto& rec : dataset.records) {
    if (!rec.pair_groups.empty()) {
      for (auto [a, b] : rec.pair_groups)
        ious.push_back(iou(rec.instances[a].box, rec.instances[b].box));
    } else {
      const int m = static_cast<int>(rec.instances.size());
      for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) {
          const double v = iou(rec.instances[a].box, rec.instances[b].box);
          if (v > 0.0) ious.push_back(v);
        }
    }
  }
  return occlusion_stats_from_ious(ious);
}

std::string OcclusionStats::table_row(const std::string& name) const {
  auto pct = [this](long long c) {
    return total > 0 ? static_cast<int>(std::lround(100.0 * c / total)) : 0;
  };
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-10s %8lld   %6lld (%d%%)   %6lld (%d%%)   %6lld (%d%%)   %.2f%s",
                name.c_str(), total, above_30, pct(above_30), above_50, pct(above_50), above_75,
                pct(above_75), average_iou, empty ? "   [empty]" : "");
  return buf;
}

InvVisReport inv_vis_breakdown(const std::vector<PredInstance>& preds,
                               const std::vector<GtEvalInstance>& gts,
                               const std::vector<double>& sigmas) {
  if (preds.size() != gts.size())
    throw ConfigError("inv_vis_breakdown: predictions and gts must be aligned");
  InvVisReport rep;
  long long inv75 = 0, inv90 = 0, vis75 = 0, vis90 = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Pose& p = preds[i].pose;
    const GroundTruthPose& g = gts[i].gt;
    if (p.size() != g.size() || static_cast<int>(sigmas.size()) != g.size())
      throw ConfigError("inv_vis_breakdown: joint count mismatch");
    const double s2 = gts[i].area;
    for (int k = 0; k < g.size(); ++k) {
      if (!g.joints[k].labeled) continue;
      const double dx = p.joints[k].x - g.joints[k].x;
      const double dy = p.joints[k].y - g.joints[k].y;
      const double kk = 2.0 * sigmas[k];
      const double e = std::exp(-(dx * dx + dy * dy) / (2.0 * s2 * kk * kk));
      if (g.joints[k].visible) {
        ++rep.vis_count;
        vis75 += e >= 0.75 ? 1 : 0;
        vis90 += e >= 0.90 ? 1 : 0;
      } else {
        ++rep.inv_count;
        inv75 += e >= 0.75 ? 1 : 0;
        inv90 += e >= 0.90 ? 1 : 0;
      }
    }
  }
  if (rep.inv_count > 0) {
    rep.inv75 = static_cast<double>(inv75) / rep.inv_count;
    rep.inv90 = static_cast<double>(inv90) / rep.inv_count;
  }
  if (rep.vis_count > 0) {
    rep.vis75 = static_cast<double>(vis75) / rep.vis_count;
    rep.vis90 = static_cast<double>(vis90) / rep.vis_count;
  }
  return rep;
}

JointErrorStats joint_error_stats(const std::vector<Pose>& preds,
                                  const std::vector<GroundTruthPose>& gts) {
  if (preds.size() != gts.size())
    throw ConfigError("joint_error_stats: predictions and gts must be aligned");
  JointErrorStats st;
  double inv_acc = 0.0, vis_acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].frame != gts[i].frame)
      throw ConfigError("joint_error_stats: frame mismatch");
    for (int k = 0; k < gts[i].size(); ++k) {
      const GtJoint& gj = gts[i].joints[k];
      if (!gj.labeled) continue;
      const double e = std::fabs(preds[i].joints[k].x - gj.x) +
                       std::fabs(preds[i].joints[k].y - gj.y);
      if (gj.visible) {
        vis_acc += e;
        ++st.vis_count;
      } else {
        inv_acc += e;
        ++st.inv_count;
      }
    }
  }
  if (st.inv_count > 0) st.inv_mean_l1 = inv_acc / st.inv_count;
  if (st.vis_count > 0) st.vis_mean_l1 = vis_acc / st.vis_count;
  return st;
}

std::vector<std::pair<int, int>> pair_people(const std::vector<BoundingBox>& boxes) {
  struct Cand {
    double iou;
    int a, b;
  };
  std::vector<Cand> cands;
  const int n = static_cast<int>(boxes.size());
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const double v = iou(boxes[a], boxes[b]);
      if (v > 0.0) cands.push_back({v, a, b});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
    if (x.iou != y.iou) return x.iou > y.iou;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  std::vector<bool> used(boxes.size(), false);
  std::vector<std::pair<int, int>> pairs;
  for (const auto& c : cands) {
    if (used[c.a] || used[c.b]) continue;
    used[c.a] = used[c.b] = true;
    pairs.emplace_back(c.a, c.b);
  }
  return pairs;
}

}  // namespace posekit
