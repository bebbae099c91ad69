#include "posekit/model.hpp"

#include <cmath>

#include "posekit/errors.hpp"
#include "posekit/kernels.hpp"
#include "posekit/rng.hpp"

namespace posekit {

using ad::Var;

// ------------------------------------------------------------------ ParamStore

Parameter& ParamStore::create(const std::string& name, std::vector<int> shape) {
  if (find(name)) throw ConfigError("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor::zeros(shape);
  p->grad = Tensor::zeros(shape);
  p->adam_m = Tensor::zeros(shape);
  p->adam_v = Tensor::zeros(std::move(shape));
  items_.push_back(std::move(p));
  return *items_.back();
}

Parameter* ParamStore::find(const std::string& name) {
  for (auto& p : items_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParamStore::find(const std::string& name) const {
  return const_cast<ParamStore*>(this)->find(name);
}

std::int64_t ParamStore::total_size() const {
  std::int64_t n = 0;
  for (const auto& p : items_) n += p->value.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& p : items_) p->grad.fill(0.0);
}

// ------------------------------------------------------------------------ Tape

Var Tape::param(Parameter& p) {
  for (auto& [bp, node] : bound_)
    if (bp == &p) return Var(node);
  Var v = Var::leaf_shared(p.value, grad_enabled_ && p.trainable);
  bound_.emplace_back(&p, v.node());
  return v;
}

void Tape::backward_and_accumulate(const Var& loss, double scale) {
  ad::backward(loss);
  for (auto& [p, node] : bound_) {
    if (!node->grad.allocated()) continue;
    kernels::axpy(scale, node->grad.data(), p->grad.data(),
                  static_cast<std::size_t>(p->grad.numel()));
  }
}

// ----------------------------------------------------------------- ModelConfig

void ModelConfig::validate() const {
  if (crop_size < 16 || crop_size % 8 != 0)
    throw ConfigError("model: crop_size must be a multiple of 8, at least 16");
  if (in_channels != 1 && in_channels != 3)
    throw ConfigError("model: in_channels must be 1 or 3");
  for (int c : encoder_channels)
    if (c <= 0) throw ConfigError("model: encoder channels must be positive");
  if (f2_channels <= 0 || f3_channels <= 0 || embed_channels <= 0 || block_channels <= 0)
    throw ConfigError("model: channel counts must be positive");
  skeleton.validate();
}

// ----------------------------------------------------------------- soft-argmax

SoftArgmaxVars soft_argmax_ad(const Var& heatmap) {
  if (heatmap.val().ndim() != 3) throw ConfigError("soft_argmax: expected N x H x W heatmap");
  if (!heatmap.val().all_finite()) throw NumericError("soft_argmax: non-finite heatmap");
  const int n = heatmap.val().dim(0), h = heatmap.val().dim(1), w = heatmap.val().dim(2);
  const int cells = h * w;
  Var flat = ad::reshape(heatmap, {n, cells});
  Var scores = ad::softmax_rows(flat);

  Tensor xs({cells, 1}), ys({cells, 1});
  for (int i = 0; i < cells; ++i) {
    xs[i] = i % w;
    ys[i] = i / w;
  }
  Var ex = ad::reshape(ad::matmul(scores, Var::constant(std::move(xs))), {1, n});
  Var ey = ad::reshape(ad::matmul(scores, Var::constant(std::move(ys))), {1, n});
  SoftArgmaxVars out;
  out.grid_xy = ad::concat_rows({ex, ey});
  out.conf = ad::reshape(ad::row_max(scores), {1, n});
  return out;
}

Pose soft_argmax(const Tensor& heatmap) {
  SoftArgmaxVars v = soft_argmax_ad(Var::constant(heatmap));
  Pose pose;
  pose.frame = Frame::kHeatmapGrid;
  const int n = heatmap.dim(0);
  pose.joints.resize(n);
  for (int j = 0; j < n; ++j)
    pose.joints[j] = {v.grid_xy.val().at2(0, j), v.grid_xy.val().at2(1, j), v.conf.val().at2(0, j)};
  return pose;
}

Pose hard_argmax(const Tensor& heatmap) {
  if (heatmap.ndim() != 3) throw ConfigError("hard_argmax: expected N x H x W heatmap");
  if (!heatmap.all_finite()) throw NumericError("hard_argmax: non-finite heatmap");
  const int n = heatmap.dim(0), h = heatmap.dim(1), w = heatmap.dim(2);
  Pose pose;
  pose.frame = Frame::kHeatmapGrid;
  pose.joints.resize(n);
  for (int j = 0; j < n; ++j) {
    const double* cell = heatmap.data() + static_cast<std::size_t>(j) * h * w;
    int best = 0;
    double sum_exp = 0.0, peak = cell[0];
    for (int i = 1; i < h * w; ++i)
      if (cell[i] > peak) {
        peak = cell[i];
        best = i;
      }
    for (int i = 0; i < h * w; ++i) sum_exp += std::exp(cell[i] - peak);
    pose.joints[j] = {static_cast<double>(best % w), static_cast<double>(best / w), 1.0 / sum_exp};
  }
  return pose;
}

// -------------------------------------------------------------- graph building

Var gcn_layer(Tape& t, const GcnParams& p, const Var& x, const Var& adj_t) {
  Var self = ad::matmul(t.param(*p.w_self), x);
  Var neigh = ad::matmul(t.param(*p.w_neigh), ad::matmul(x, adj_t));
  return ad::relu(ad::add_bias_cols(self + neigh, t.param(*p.b)));
}

Var self_attention(Tape& t, const AttnParams& p, const Var& z) {
  const int c = z.val().dim(0);
  Var q = ad::linear_cols(t.param(*p.wq), z, t.param(*p.bq));
  Var k = ad::linear_cols(t.param(*p.wk), z, t.param(*p.bk));
  Var v = ad::linear_cols(t.param(*p.wv), z, t.param(*p.bv));
  Var scores = ad::mul_scalar(ad::matmul(ad::transpose(q), k), 1.0 / std::sqrt(c));
  Var weights = ad::softmax_rows(scores);          // row i: query node i over all keys
  Var mixed = ad::matmul(v, ad::transpose(weights));
  return z + mixed;
}

Var resgcn_attention_block(Tape& t, const RabParams& p, const Var& node_feats,
                           const Var& sampled, const Var& adj_t,
                           const std::optional<Var>& skip_extra) {
  Var x = ad::concat_rows({node_feats, sampled});
  Var main = gcn_layer(t, p.main2, gcn_layer(t, p.main1, x, adj_t), adj_t);
  Var skip_in = skip_extra ? ad::concat_rows({x, *skip_extra}) : x;
  Var skip = gcn_layer(t, p.skip, skip_in, adj_t);
  return self_attention(t, p.attn, main + skip);
}

// ------------------------------------------------------------------- PoseModel

namespace {

void he_uniform(Tensor& w, int fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / fan_in);
  for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-limit, limit);
}

}  // namespace

PoseModel::PoseModel(ModelConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  adj_t_ = rownorm_adjacency_t(build_adjacency(cfg_.skeleton));
  couple_adj_t_ = rownorm_adjacency_t(build_couple_graph(cfg_.skeleton).adjacency);

  Rng rng(init_seed);
  auto conv = [&](const std::string& name, int out_c, int in_c, int k, int stride, int pad,
                  bool zero_init = false) {
    ConvParams p;
    p.w = &store_.create(name + ".w", {out_c, in_c, k, k});
    p.b = &store_.create(name + ".b", {out_c});
    p.stride = stride;
    p.pad = pad;
    if (!zero_init) he_uniform(p.w->value, in_c * k * k, rng);
    return p;
  };
  auto gcn = [&](const std::string& name, int out_c, int in_c) {
    GcnParams p;
    p.w_self = &store_.create(name + ".w_self", {out_c, in_c});
    p.w_neigh = &store_.create(name + ".w_neigh", {out_c, in_c});
    p.b = &store_.create(name + ".b", {out_c});
    he_uniform(p.w_self->value, in_c, rng);
    he_uniform(p.w_neigh->value, in_c, rng);
    return p;
  };
  auto attn = [&](const std::string& name, int c) {
    AttnParams p;
    p.wq = &store_.create(name + ".wq", {c, c});
    p.bq = &store_.create(name + ".bq", {c});
    p.wk = &store_.create(name + ".wk", {c, c});
    p.bk = &store_.create(name + ".bk", {c});
    p.wv = &store_.create(name + ".wv", {c, c});
    p.bv = &store_.create(name + ".bv", {c});
    he_uniform(p.wq->value, c, rng);
    he_uniform(p.wk->value, c, rng);
    he_uniform(p.wv->value, c, rng);
    return p;
  };
  auto rab = [&](const std::string& name, int in_c, int out_c, int skip_in_c) {
    RabParams p;
    p.main1 = gcn(name + ".main1", out_c, in_c);
    p.main2 = gcn(name + ".main2", out_c, out_c);
    p.skip = gcn(name + ".skip", out_c, skip_in_c);
    p.attn = attn(name + ".attn", out_c);
    return p;
  };
  auto zero_linear = [&](const std::string& name, int out_c, int in_c) {
    LinearParams p;
    p.w = &store_.create(name + ".w", {out_c, in_c});
    p.b = &store_.create(name + ".b", {out_c});
    return p;
  };

  const auto [e1, e2, e3] = cfg_.encoder_channels;
  const int f2c = cfg_.f2_channels, f3c = cfg_.f3_channels;
  const int embed = cfg_.embed_channels, block = cfg_.block_channels;
  const int n_joints = cfg_.num_joints();

  enc1_ = conv("backbone.enc1", e1, cfg_.in_channels, 3, 2, 1);
  enc2_ = conv("backbone.enc2", e2, e1, 3, 2, 1);
  enc3_ = conv("backbone.enc3", e3, e2, 3, 2, 1);
  dec2_ = conv("backbone.dec2", f2c, e3, 3, 1, 1);
  dec3_ = conv("backbone.dec3", f3c, f2c, 3, 1, 1);
  head_ = conv("heatmap_head", n_joints, f3c, 3, 1, 1);

  if (cfg_.ablation.cfa_enabled) {
    if (cfg_.ablation.fusion_enabled) {
      cfa_conv1_ = conv("cfa.conv1", e3, e3, 3, 1, 1);
      fuse2_.proj = conv("cfa.fuse2.proj", f2c, e3, 1, 1, 0);
      fuse2_.attn = conv("cfa.fuse2.attn", 1, 2 * f2c, 1, 1, 0);
      fuse2_.conv = conv("cfa.fuse2.conv", f2c, f2c, 3, 1, 1);
      fuse3_.proj = conv("cfa.fuse3.proj", f3c, f2c, 1, 1, 0);
      fuse3_.attn = conv("cfa.fuse3.attn", 1, 2 * f3c, 1, 1, 0);
      fuse3_.conv = conv("cfa.fuse3.conv", f3c, f3c, 3, 1, 1);
    } else {
      cfa_conv1_ = conv("cfa.conv1", e3, e3, 3, 1, 1);
      plain2_ = conv("cfa.plain2", f2c, f2c, 3, 1, 1);
      plain3_ = conv("cfa.plain3", f3c, f3c, 3, 1, 1);
    }
  }

  embed1_ = gcn("gcn.embed1", embed, 3);
  embed2_ = gcn("gcn.embed2", embed, embed);

  if (cfg_.ablation.progressive) {
    for (int j = 0; j < 3; ++j) {
      const int in_c = (j == 0 ? embed : block) + sampled_channels(j);
      const int skip_in = in_c + (j == 2 ? embed : 0);
      rab_[j] = rab("gcn.rab" + std::to_string(j + 1), in_c, block, skip_in);
      disp_head_[j] = zero_linear("gcn.head" + std::to_string(j + 1), 2, block);
    }
  } else {
    const int in_c = embed + f3c;
    rab_single_ = rab("gcn.rab_single", in_c, block, in_c);
    disp_single_ = zero_linear("gcn.head_single", 2, block);
  }

  couple_embed_ = gcn("couple.embed", embed, 5);
  couple_rab_ = rab("couple.rab", embed + f3c, block, embed + f3c);
  couple_head_ = zero_linear("couple.head", 2, block);
}

int PoseModel::sampled_channels(int block) const {
  if (!cfg_.ablation.multi_scale_features) return cfg_.f3_channels;
  switch (block) {
    case 0: return cfg_.encoder_channels[2];
    case 1: return cfg_.f2_channels;
    default: return cfg_.f3_channels;
  }
}

namespace {

Var conv_fwd(Tape& t, const ConvParams& p, const Var& x) {
  return ad::conv2d(x, t.param(*p.w), t.param(*p.b), p.stride, p.pad);
}

}  // namespace

PyramidVars PoseModel::backbone_forward(Tape& t, const Var& crop) const {
  if (crop.val().ndim() != 3 || crop.val().dim(0) != cfg_.in_channels ||
      crop.val().dim(1) != cfg_.crop_size || crop.val().dim(2) != cfg_.crop_size)
    throw ConfigError("backbone: crop shape " + crop.val().shape_str() + " does not match config");
  Var x = ad::relu(conv_fwd(t, enc1_, crop));
  x = ad::relu(conv_fwd(t, enc2_, x));
  Var f1 = ad::relu(conv_fwd(t, enc3_, x));
  const int s2 = cfg_.crop_size / 4, s3 = cfg_.crop_size / 2;
  Var f2 = ad::relu(conv_fwd(t, dec2_, ad::bilinear_resize(f1, s2, s2)));
  Var f3 = ad::relu(conv_fwd(t, dec3_, ad::bilinear_resize(f2, s3, s3)));
  return {f1, f2, f3};
}

Var PoseModel::fusion_forward(Tape& t, const FusionParams& p, const Var& coarse,
                              const Var& fine) const {
  if (coarse.val().dim(1) * 2 != fine.val().dim(1) || coarse.val().dim(2) * 2 != fine.val().dim(2))
    throw ConfigError("fusion: coarse map must be one pyramid level below the fine map");
  const int c = fine.val().dim(0), fh = fine.val().dim(1), fw = fine.val().dim(2);
  Var up = ad::bilinear_resize(coarse, fh, fw);
  Var proj = conv_fwd(t, p.proj, up);
  if (proj.val().dim(0) != c) throw ConfigError("fusion: projected channel mismatch");
  Var cat = ad::reshape(ad::concat_rows({ad::reshape(proj, {c, fh * fw}),
                                         ad::reshape(fine, {c, fh * fw})}),
                        {2 * c, fh, fw});
  Var gate = ad::sigmoid(conv_fwd(t, p.attn, cat));  // 1 x H x W, in [0,1]
  Var inv_gate = ad::add_scalar(ad::mul_scalar(gate, -1.0), 1.0);
  Var blend = ad::mul_bcast0(proj, gate) + ad::mul_bcast0(fine, inv_gate);
  return ad::relu(conv_fwd(t, p.conv, blend));
}

PyramidVars PoseModel::cfa_forward(Tape& t, const PyramidVars& pyr) const {
  if (!cfg_.ablation.cfa_enabled) return pyr;
  if (!cfg_.ablation.fusion_enabled) {
    return {ad::relu(conv_fwd(t, cfa_conv1_, pyr.f1)), ad::relu(conv_fwd(t, plain2_, pyr.f2)),
            ad::relu(conv_fwd(t, plain3_, pyr.f3))};
  }
  Var a1 = ad::relu(conv_fwd(t, cfa_conv1_, pyr.f1));
  Var a2 = fusion_forward(t, fuse2_, a1, pyr.f2);
  Var a3 = fusion_forward(t, fuse3_, a2, pyr.f3);
  return {a1, a2, a3};
}

Var PoseModel::heatmap_forward(Tape& t, const Var& adapted_f3) const {
  return conv_fwd(t, head_, adapted_f3);
}

TraceVars PoseModel::forward(Tape& t, const Var& crop) const {
  TraceVars out;
  PyramidVars pyr = backbone_forward(t, crop);
  out.adapted = cfa_forward(t, pyr);
  out.heatmap = heatmap_forward(t, out.adapted.f3);

  SoftArgmaxVars sa = soft_argmax_ad(out.heatmap);
  const int hm = cfg_.heatmap_size();
  out.init.grid_xy = sa.grid_xy;
  out.init.conf = sa.conf;
  out.init.norm_xy = ad::add_scalar(ad::mul_scalar(sa.grid_xy, 2.0 / hm), 1.0 / hm - 1.0);

  const Var adj = t.constant(adj_t_);
  const int n = cfg_.num_joints();
  Var emb = gcn_layer(t, embed2_,
                      gcn_layer(t, embed1_, ad::concat_rows({out.init.norm_xy, out.init.conf}), adj),
                      adj);
  Var coords = out.init.norm_xy;

  auto sample_or_zero = [&](const Var& fmap, const Var& at, int channels) {
    if (cfg_.ablation.image_guided) return ad::grid_sample(fmap, at);
    return t.constant(Tensor::zeros({channels, n}));
  };

  if (cfg_.ablation.progressive) {
    const Var maps[3] = {out.adapted.f1, out.adapted.f2, out.adapted.f3};
    Var feats = emb;
    Var poses[3];
    for (int j = 0; j < 3; ++j) {
      const Var& fmap = cfg_.ablation.multi_scale_features ? maps[j] : out.adapted.f3;
      Var sampled = sample_or_zero(fmap, coords, sampled_channels(j));
      std::optional<Var> extra;
      if (j == 2) extra = emb;
      feats = resgcn_attention_block(t, rab_[j], feats, sampled, adj, extra);
      Var disp = ad::linear_cols(t.param(*disp_head_[j].w), feats, t.param(*disp_head_[j].b));
      coords = coords + disp;
      poses[j] = coords;
    }
    out.pose1 = poses[0];
    out.pose2 = poses[1];
    out.final_pose = poses[2];
  } else {
    Var sampled = sample_or_zero(out.adapted.f3, coords, cfg_.f3_channels);
    Var feats = resgcn_attention_block(t, rab_single_, emb, sampled, adj);
    Var disp = ad::linear_cols(t.param(*disp_single_.w), feats, t.param(*disp_single_.b));
    coords = coords + disp;
    out.pose1 = coords;
    out.pose2 = coords;
    out.final_pose = coords;
  }
  return out;
}

namespace {

// lexicographic pose-content key; ties fall back to confidence
bool couple_before(const PoseModel::CoupleInstance& a, const PoseModel::CoupleInstance& b) {
  for (std::int64_t i = 0; i < a.xy.val().numel(); ++i)
    if (a.xy.val()[i] != b.xy.val()[i]) return a.xy.val()[i] < b.xy.val()[i];
  for (std::int64_t i = 0; i < a.conf.val().numel(); ++i)
    if (a.conf.val()[i] != b.conf.val()[i]) return a.conf.val()[i] < b.conf.val()[i];
  return true;
}

}  // namespace

std::pair<Var, Var> PoseModel::couple_forward(Tape& t, const CoupleInstance& a,
                                              const CoupleInstance& b) const {
  // Canonical content order: the frame tag is tied to the instance, not the
  // argument slot, so swapping the inputs exactly swaps the outputs.
  if (!couple_before(a, b)) {
    auto [rb, ra] = couple_forward(t, b, a);
    return {ra, rb};
  }
  const int n = cfg_.num_joints();
  if (a.xy.val().dim(1) != n || b.xy.val().dim(1) != n)
    throw ConfigError("couple: instances do not match the configured skeleton");
  Var xy = ad::concat_cols({a.xy, b.xy});
  Var conf = ad::concat_cols({a.conf, b.conf});
  Tensor tags({2, 2 * n});
  for (int i = 0; i < n; ++i) {
    tags.at2(0, i) = 1.0;
    tags.at2(1, n + i) = 1.0;
  }
  Var x = ad::concat_rows({xy, conf, t.constant(std::move(tags))});
  const Var adj = t.constant(couple_adj_t_);
  Var emb = gcn_layer(t, couple_embed_, x, adj);
  Var sampled = ad::concat_cols({ad::grid_sample(a.f3, a.xy), ad::grid_sample(b.f3, b.xy)});
  Var feats = resgcn_attention_block(t, couple_rab_, emb, sampled, adj);
  Var disp = ad::linear_cols(t.param(*couple_head_.w), feats, t.param(*couple_head_.b));
  Var refined = xy + disp;
  return {ad::slice_cols(refined, 0, n), ad::slice_cols(refined, n, 2 * n)};
}

}  // namespace posekit
