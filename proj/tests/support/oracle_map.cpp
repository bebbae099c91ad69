#include "support/oracle_map.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace posekit::test {

namespace {

// independent OKS evaluation (deliberately not calling posekit::compute_oks)
double oks_of(const Pose& pred, const GroundTruthPose& gt, double area,
              const std::vector<double>& sigmas) {
  double acc = 0.0;
  int labeled = 0;
  for (int i = 0; i < gt.size(); ++i) {
    if (!gt.joints[i].labeled) continue;
    const double dx = pred.joints[i].x - gt.joints[i].x;
    const double dy = pred.joints[i].y - gt.joints[i].y;
    const double k = 2.0 * sigmas[i];
    acc += std::exp(-(dx * dx + dy * dy) / (2.0 * area * k * k));
    ++labeled;
  }
  return labeled > 0 ? acc / labeled : 0.0;
}

struct Assignment {
  std::vector<int> gt_of_pred;  // -1 when unmatched
  std::vector<double> oks;
};

// lexicographic comparison over the (matched, oks) sequence in pred order
bool lex_better(const Assignment& a, const Assignment& b) {
  for (std::size_t i = 0; i < a.gt_of_pred.size(); ++i) {
    const int ma = a.gt_of_pred[i] >= 0 ? 1 : 0, mb = b.gt_of_pred[i] >= 0 ? 1 : 0;
    if (ma != mb) return ma > mb;
    if (a.oks[i] != b.oks[i]) return a.oks[i] > b.oks[i];
  }
  return false;
}

void enumerate(const std::vector<std::vector<double>>& oks, double threshold, std::size_t pi,
               std::vector<bool>& used, Assignment& current, Assignment& best, bool& has_best) {
  if (pi == oks.size()) {
    if (!has_best || lex_better(current, best)) {
      best = current;
      has_best = true;
    }
    return;
  }
  // leave this prediction unmatched
  current.gt_of_pred[pi] = -1;
  current.oks[pi] = 0.0;
  enumerate(oks, threshold, pi + 1, used, current, best, has_best);
  // or match it to any free gt above the threshold
  for (std::size_t gi = 0; gi < used.size(); ++gi) {
    if (used[gi] || oks[pi][gi] < threshold) continue;
    used[gi] = true;
    current.gt_of_pred[pi] = static_cast<int>(gi);
    current.oks[pi] = oks[pi][gi];
    enumerate(oks, threshold, pi + 1, used, current, best, has_best);
    used[gi] = false;
  }
  current.gt_of_pred[pi] = -1;
  current.oks[pi] = 0.0;
}

}  // namespace

OracleReport oracle_compute_map(const std::vector<PredInstance>& preds,
                                const std::vector<GtEvalInstance>& gts,
                                const std::vector<double>& sigmas) {
  // same global ranking rule as the evaluator under test
  std::vector<const PredInstance*> ranked;
  for (const auto& p : preds) ranked.push_back(&p);
  std::sort(ranked.begin(), ranked.end(), [](const PredInstance* a, const PredInstance* b) {
    if (a->score != b->score) return a->score > b->score;
    if (a->image_id != b->image_id) return a->image_id < b->image_id;
    return a->index < b->index;
  });

  std::map<int, std::vector<const GtEvalInstance*>> gts_by_image;
  long long total_gt = 0;
  for (const auto& g : gts) {
    if (g.gt.labeled_count() == 0) continue;
    gts_by_image[g.image_id].push_back(&g);
    ++total_gt;
  }

  OracleReport rep;
  for (int ti = 0; ti < 10; ++ti) {
    const double t = 0.50 + 0.05 * ti;

    // per image: positions of its predictions in the global ranking, plus
    // the lexicographically best assignment at this threshold
    std::vector<bool> is_tp(ranked.size(), false);
    for (const auto& [image_id, image_gts] : gts_by_image) {
      std::vector<std::size_t> pred_pos;
      for (std::size_t i = 0; i < ranked.size(); ++i)
        if (ranked[i]->image_id == image_id) pred_pos.push_back(i);
      if (pred_pos.empty()) continue;

      std::vector<std::vector<double>> oks(pred_pos.size());
      for (std::size_t pi = 0; pi < pred_pos.size(); ++pi)
        for (const auto* g : image_gts)
          oks[pi].push_back(oks_of(ranked[pred_pos[pi]]->pose, g->gt, g->area, sigmas));

      Assignment current, best;
      current.gt_of_pred.assign(pred_pos.size(), -1);
      current.oks.assign(pred_pos.size(), 0.0);
      std::vector<bool> used(image_gts.size(), false);
      bool has_best = false;
      enumerate(oks, t, 0, used, current, best, has_best);
      for (std::size_t pi = 0; pi < pred_pos.size(); ++pi)
        is_tp[pred_pos[pi]] = best.gt_of_pred[pi] >= 0;
    }

    // precision/recall in ranking order, then quadratic interpolated AP
    std::vector<double> precision, recall;
    long long tp = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      tp += is_tp[i] ? 1 : 0;
      precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
      recall.push_back(total_gt > 0 ? static_cast<double>(tp) / total_gt : 0.0);
    }
    double ap = 0.0, prev_r = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i) {
      double pmax = 0.0;
      for (std::size_t j = i; j < precision.size(); ++j) pmax = std::max(pmax, precision[j]);
      ap += (recall[i] - prev_r) * pmax;
      prev_r = recall[i];
    }

    rep.per_threshold.push_back(ap);
    rep.map_50_95 += ap / 10.0;
    if (ti == 0) rep.ap50 = ap;
    if (ti == 5) rep.ap75 = ap;
    if (ti == 6) rep.ap80 = ap;
    if (ti == 8) rep.ap90 = ap;
  }
  return rep;
}

}  // namespace posekit::test
