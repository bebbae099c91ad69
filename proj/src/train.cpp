#include "posekit/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include "posekit/checkpoint.hpp"
#include "posekit/config.hpp"
#include "posekit/errors.hpp"
#include "posekit/eval.hpp"
#include "posekit/rng.hpp"

namespace posekit {

using ad::Var;

void TrainingConfig::validate() const {
  for (double l : lambdas)
    if (l < 0.0) throw ConfigError("training: lambdas must be non-negative");
  if (!(lambdas[2] > 0.0)) throw ConfigError("training: lambda3 must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("training: learning_rate must be positive");
  if (epochs < 1) throw ConfigError("training: epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("training: batch_size must be at least 1");
  model.validate();
}

Var masked_l1(const Var& pred_xy, const GroundTruthPose& gt) {
  if (gt.frame != Frame::kNormalized)
    throw ConfigError(std::string("masked_l1: ground truth frame is ") + frame_name(gt.frame) +
                      ", expected normalized");
  const int n = gt.size();
  if (pred_xy.val().ndim() != 2 || pred_xy.val().dim(0) != 2 || pred_xy.val().dim(1) != n)
    throw ConfigError("masked_l1: prediction must be 2 x " + std::to_string(n));
  const int labeled = gt.labeled_count();
  if (labeled == 0) return Var::constant(Tensor::scalar(0.0));
  Tensor gt_t({2, n}), mask({2, n});
  for (int k = 0; k < n; ++k) {
    gt_t.at2(0, k) = gt.joints[k].x;
    gt_t.at2(1, k) = gt.joints[k].y;
    const double m = gt.joints[k].labeled ? 1.0 : 0.0;
    mask.at2(0, k) = m;
    mask.at2(1, k) = m;
  }
  Var diff = ad::sub(pred_xy, Var::constant(std::move(gt_t)));
  Var masked = ad::mul(ad::abs(diff), Var::constant(std::move(mask)));
  return ad::mul_scalar(ad::sum(masked), 1.0 / labeled);
}

LossParts total_loss(const TraceVars& trace, const GroundTruthPose& gt_norm,
                     const std::array<double, 3>& lambdas) {
  Var l1 = masked_l1(trace.pose1, gt_norm);
  Var l2 = masked_l1(trace.pose2, gt_norm);
  Var l3 = masked_l1(trace.final_pose, gt_norm);
  Var li = masked_l1(trace.init.norm_xy, gt_norm);
  LossParts parts;
  parts.pose1 = l1.val()[0];
  parts.pose2 = l2.val()[0];
  parts.pose3 = l3.val()[0];
  parts.init = li.val()[0];
  parts.total = ad::add(
      ad::add(ad::add(ad::mul_scalar(l1, lambdas[0]), ad::mul_scalar(l2, lambdas[1])),
              ad::mul_scalar(l3, lambdas[2])),
      li);
  return parts;
}

double cosine_lr(double lr0, long long step, long long total_steps) {
  if (total_steps <= 0) return lr0;
  const double t = std::min<double>(static_cast<double>(step), static_cast<double>(total_steps));
  return lr0 * 0.5 * (1.0 + std::cos(M_PI * t / static_cast<double>(total_steps)));
}

void AdamOptimizer::step(ParamStore& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& p : params.items()) {
    if (!p->trainable) continue;
    double* w = p->value.data();
    const double* g = p->grad.data();
    double* m = p->adam_m.data();
    double* v = p->adam_v.data();
    const std::int64_t n = p->value.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
  }
}

TrainSample flip_sample(const TrainSample& sample, const SkeletonSpec& skeleton) {
  TrainSample out = sample;
  const int c = sample.crop_pixels.dim(0), h = sample.crop_pixels.dim(1),
            w = sample.crop_pixels.dim(2);
  out.crop_pixels = Tensor::zeros({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.crop_pixels.at3(ch, y, x) = sample.crop_pixels.at3(ch, y, w - 1 - x);

  std::vector<int> map(skeleton.num_joints);
  std::iota(map.begin(), map.end(), 0);
  for (auto [l, r] : skeleton.flip_pairs) {
    map[l] = r;
    map[r] = l;
  }
  for (int k = 0; k < skeleton.num_joints; ++k) {
    GtJoint j = sample.gt_crop.joints[map[k]];
    j.x = (w - 1) - j.x;
    out.gt_crop.joints[k] = j;
  }
  return out;
}

GroundTruthPose sample_gt_norm(const TrainSample& sample) {
  const int s = sample.crop_pixels.dim(1);
  return normalize_gt(sample.gt_crop, {0.0, 0.0, static_cast<double>(s), static_cast<double>(s)});
}

std::vector<int> select_proposals(const std::vector<ProposalCandidate>& candidates,
                                  const std::vector<double>& sigmas) {
  std::vector<int> kept;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.gt.visible_count() <= 5) continue;
    if (compute_oks(c.pose, c.gt, c.area, sigmas) <= 0.3) continue;
    kept.push_back(static_cast<int>(i));
  }
  return kept;
}

std::string loss_log_csv(const std::vector<LossRow>& rows) {
  std::string out = "step,epoch,lr,loss,term_init,term_pose1,term_pose2,term_pose3\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step,
                  r.epoch, r.lr, r.total, r.init, r.pose1, r.pose2, r.pose3);
    out += buf;
  }
  return out;
}

std::vector<TrainSample> build_train_samples(const Dataset& dataset, const ModelConfig& model_cfg) {
  if (dataset.skeleton.num_joints != model_cfg.num_joints())
    throw DataError("dataset skeleton has " + std::to_string(dataset.skeleton.num_joints) +
                    " joints, model expects " + std::to_string(model_cfg.num_joints()));
  std::vector<TrainSample> samples;
  for (std::size_t ri = 0; ri < dataset.records.size(); ++ri) {
    const DatasetRecord& rec = dataset.records[ri];
    if (rec.instances.empty()) continue;
    const ImageF img = load_record_image(dataset, rec, model_cfg.in_channels);
    for (std::size_t ii = 0; ii < rec.instances.size(); ++ii) {
      const Instance& inst = rec.instances[ii];
      Crop crop = crop_instance(img, inst.box, model_cfg.crop_size);
      TrainSample s;
      s.crop_pixels = std::move(crop.pixels.pixels);
      s.expanded = crop.expanded;
      s.record_idx = static_cast<int>(ri);
      s.inst_idx = static_cast<int>(ii);
      s.image_id = rec.image_id;
      s.gt_crop = inst.gt;
      s.gt_crop.frame = Frame::kCropPixels;
      for (auto& j : s.gt_crop.joints) crop.to_crop.apply(j.x, j.y, j.x, j.y);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

namespace {

// Largest-gradient joint on the final pose, for the non-finite-loss abort.
int worst_joint(const Var& final_pose) {
  const Tensor& g = final_pose.grad();
  int best = 0;
  double best_mag = -1.0;
  if (!g.allocated()) return 0;
  for (int k = 0; k < final_pose.val().dim(1); ++k) {
    const double gx = g.at2(0, k), gy = g.at2(1, k);
    const double mag =
        (std::isnan(gx) || std::isnan(gy)) ? std::numeric_limits<double>::infinity()
                                           : std::fabs(gx) + std::fabs(gy);
    if (mag > best_mag) {
      best_mag = mag;
      best = k;
    }
  }
  return best;
}

std::filesystem::path epoch_checkpoint_path(const std::filesystem::path& out_dir, int epoch) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "ckpt_epoch_%03d.ckpt", epoch);
  return out_dir / buf;
}

}  // namespace

TrainResult train(PoseModel& model, const Dataset& dataset, const TrainingConfig& cfg,
                  const std::filesystem::path& out_dir, const std::filesystem::path& resume_from) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  std::vector<TrainSample> samples = build_train_samples(dataset, cfg.model);
  if (samples.empty()) throw DataError("training dataset has no instances");

  AdamOptimizer adam;
  int start_epoch = 0;
  long long gstep = 0;
  if (!resume_from.empty()) {
    const CheckpointMeta meta = load_checkpoint(resume_from, model);
    adam.set_steps(meta.adam_step);
    start_epoch = meta.epoch;
    gstep = meta.global_step;
  }

  const int n = static_cast<int>(samples.size());
  const long long steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const long long total_steps = steps_per_epoch * cfg.epochs;

  TrainResult result;
  result.final_checkpoint = resume_from;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    Rng erng(cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch) + 1);
    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    erng.shuffle(order);

    if (cfg.proposal_filter) {
      std::vector<ProposalCandidate> cands;
      cands.reserve(order.size());
      for (int idx : order) {
        Tape tape(false);
        const TraceVars trace = model.forward(tape, tape.constant(samples[idx].crop_pixels));
        ProposalCandidate c;
        c.gt = sample_gt_norm(samples[idx]);
        c.pose.frame = Frame::kNormalized;
        c.pose.joints.resize(cfg.model.num_joints());
        for (int k = 0; k < cfg.model.num_joints(); ++k)
          c.pose.joints[k] = {trace.init.norm_xy.val().at2(0, k),
                              trace.init.norm_xy.val().at2(1, k), trace.init.conf.val().at2(0, k)};
        // normalized frame spans 2x2, so area 4 keeps OKS scale-consistent
        c.area = 4.0;
        cands.push_back(std::move(c));
      }
      const std::vector<int> kept = select_proposals(cands, cfg.model.skeleton.oks_sigmas);
      if (!kept.empty()) {
        std::vector<int> filtered;
        filtered.reserve(kept.size());
        for (int ki : kept) filtered.push_back(order[ki]);
        order = std::move(filtered);
      }
    }

    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      const double inv_bn = 1.0 / static_cast<double>(b1 - b0);
      model.params().zero_grads();
      LossRow row;
      for (std::size_t bi = b0; bi < b1; ++bi) {
        TrainSample flipped;
        const TrainSample* s = &samples[order[bi]];
        if (cfg.flip_augment_enabled && erng.uniform() < 0.5) {
          flipped = flip_sample(*s, cfg.model.skeleton);
          s = &flipped;
        }
        Tape tape(true);
        const TraceVars trace = model.forward(tape, tape.constant(s->crop_pixels));
        const LossParts lp = total_loss(trace, sample_gt_norm(*s), cfg.lambdas);
        const double lv = lp.total.val()[0];
        tape.backward_and_accumulate(lp.total, inv_bn);
        if (!std::isfinite(lv))
          throw NumericError("non-finite loss at step " + std::to_string(gstep + 1) + " (image " +
                             std::to_string(s->image_id) + ", largest final-pose gradient at joint " +
                             std::to_string(worst_joint(trace.final_pose)) + ")");
        row.total += lv * inv_bn;
        row.init += lp.init * inv_bn;
        row.pose1 += lp.pose1 * inv_bn;
        row.pose2 += lp.pose2 * inv_bn;
        row.pose3 += lp.pose3 * inv_bn;
      }
      const double lr = cosine_lr(cfg.learning_rate, gstep, total_steps);
      adam.step(model.params(), lr);
      ++gstep;
      row.step = gstep;
      row.epoch = epoch;
      row.lr = lr;
      result.log.push_back(row);
    }

    CheckpointMeta meta;
    meta.epoch = epoch + 1;
    meta.global_step = gstep;
    meta.adam_step = adam.steps_taken();
    meta.has_adam = true;
    meta.training_config_json = training_config_to_json(cfg).dump();
    const auto ck = epoch_checkpoint_path(out_dir, epoch + 1);
    save_checkpoint(ck, model, meta);
    result.checkpoints.push_back(ck);
    result.final_checkpoint = ck;
  }
  return result;
}

TrainResult train_couple(PoseModel& model, const Dataset& dataset, const TrainingConfig& cfg,
                         const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  const std::vector<TrainSample> samples = build_train_samples(dataset, cfg.model);

  // sample index lookup per (record, instance)
  std::map<std::pair<int, int>, int> by_key;
  for (std::size_t i = 0; i < samples.size(); ++i)
    by_key[{samples[i].record_idx, samples[i].inst_idx}] = static_cast<int>(i);

  struct PairSample {
    int a, b;  // indices into samples
  };
  std::vector<PairSample> pairs;
  for (std::size_t ri = 0; ri < dataset.records.size(); ++ri) {
    const DatasetRecord& rec = dataset.records[ri];
    std::vector<std::pair<int, int>> groups = rec.pair_groups;
    if (groups.empty()) {
      std::vector<BoundingBox> boxes;
      for (const auto& inst : rec.instances) boxes.push_back(inst.box);
      groups = pair_people(boxes);
    }
    for (auto [a, b] : groups)
      pairs.push_back({by_key.at({static_cast<int>(ri), a}), by_key.at({static_cast<int>(ri), b})});
  }
  if (pairs.empty()) throw DataError("couple training: no interacting pairs in the dataset");

  // freeze everything but the couple refiner
  std::vector<bool> saved;
  for (const auto& p : model.params().items()) {
    saved.push_back(p->trainable);
    p->trainable = p->name.rfind("couple.", 0) == 0;
  }

  AdamOptimizer adam;
  const long long steps_per_epoch =
      (static_cast<long long>(pairs.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const long long total_steps = steps_per_epoch * cfg.epochs;
  long long gstep = 0;

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng(cfg.seed * 0x9E3779B97F4A7C15ULL + 0x5851F42DULL + static_cast<std::uint64_t>(epoch));
    std::vector<int> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    erng.shuffle(order);

    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      const double inv_bn = 1.0 / static_cast<double>(b1 - b0);
      model.params().zero_grads();
      LossRow row;
      for (std::size_t bi = b0; bi < b1; ++bi) {
        const PairSample& pr = pairs[order[bi]];
        Tape tape(true);
        const TraceVars ta = model.forward(tape, tape.constant(samples[pr.a].crop_pixels));
        const TraceVars tb = model.forward(tape, tape.constant(samples[pr.b].crop_pixels));
        auto [ra, rb] = model.couple_forward(
            tape, {ta.final_pose, ta.init.conf, ta.adapted.f3},
            {tb.final_pose, tb.init.conf, tb.adapted.f3});
        Var la = masked_l1(ra, sample_gt_norm(samples[pr.a]));
        Var lb = masked_l1(rb, sample_gt_norm(samples[pr.b]));
        Var loss = ad::mul_scalar(la + lb, 0.5);
        const double lv = loss.val()[0];
        tape.backward_and_accumulate(loss, inv_bn);
        if (!std::isfinite(lv))
          throw NumericError("non-finite couple loss at step " + std::to_string(gstep + 1));
        row.total += lv * inv_bn;
        row.init += la.val()[0] * inv_bn;
        row.pose1 += lb.val()[0] * inv_bn;
      }
      const double lr = cosine_lr(cfg.learning_rate, gstep, total_steps);
      adam.step(model.params(), lr);
      ++gstep;
      row.step = gstep;
      row.epoch = epoch;
      row.lr = lr;
      result.log.push_back(row);
    }
  }

  for (std::size_t i = 0; i < saved.size(); ++i) model.params().items()[i]->trainable = saved[i];

  CheckpointMeta meta;
  meta.epoch = cfg.epochs;
  meta.global_step = gstep;
  meta.adam_step = adam.steps_taken();
  meta.has_adam = true;
  meta.training_config_json = training_config_to_json(cfg).dump();
  const auto ck = out_dir / "ckpt_couple.ckpt";
  save_checkpoint(ck, model, meta);
  result.checkpoints.push_back(ck);
  result.final_checkpoint = ck;
  return result;
}

}  // namespace posekit
