#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "posekit/checkpoint.hpp"
#include "posekit/errors.hpp"
#include "posekit/model.hpp"
#include "posekit/rng.hpp"
#include "support/gradcheck.hpp"

using namespace posekit;
using ad::Var;

namespace {

Tensor rnd(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::uninit(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.in_channels = 1;
  return cfg;
}

bool poses_equal(const Var& a, const Var& b) {
  if (!a.val().same_shape(b.val())) return false;
  for (std::int64_t i = 0; i < a.val().numel(); ++i)
    if (a.val()[i] != b.val()[i]) return false;
  return true;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("backbone shape contract at the default configuration") {
  ModelConfig cfg;  // 3-channel 64x64 default
  PoseModel model(cfg, 1);
  Rng rng(3);
  Tape tape(false);
  const PyramidVars pyr = model.backbone_forward(tape, tape.constant(rnd({3, 64, 64}, rng)));
  CHECK(pyr.f1.val().shape() == std::vector<int>({64, 8, 8}));
  CHECK(pyr.f2.val().shape() == std::vector<int>({32, 16, 16}));
  CHECK(pyr.f3.val().shape() == std::vector<int>({32, 32, 32}));

  const PyramidVars adapted = model.cfa_forward(tape, pyr);
  CHECK(adapted.f1.val().shape() == std::vector<int>({64, 8, 8}));
  CHECK(adapted.f2.val().shape() == std::vector<int>({32, 16, 16}));
  CHECK(adapted.f3.val().shape() == std::vector<int>({32, 32, 32}));

  const Var hm = model.heatmap_forward(tape, adapted.f3);
  CHECK(hm.val().shape() == std::vector<int>({12, 32, 32}));

  CHECK_THROWS_AS(model.backbone_forward(tape, tape.constant(Tensor::zeros({3, 32, 32}))),
                  ConfigError);
}

TEST_CASE("zero input stays finite through the whole stack") {
  PoseModel model(small_config(), 9);
  Tape tape(false);
  const TraceVars trace = model.forward(tape, tape.constant(Tensor::zeros({1, 64, 64})));
  CHECK(trace.heatmap.val().all_finite());
  CHECK(trace.final_pose.val().all_finite());
  CHECK(trace.init.conf.val().all_finite());
}

TEST_CASE("forward passes are deterministic") {
  PoseModel model(small_config(), 4);
  Rng rng(8);
  const Tensor crop = rnd({1, 64, 64}, rng, 0.0, 1.0);
  Tape t1(false), t2(false);
  const TraceVars a = model.forward(t1, t1.constant(crop));
  const TraceVars b = model.forward(t2, t2.constant(crop));
  for (std::int64_t i = 0; i < a.heatmap.val().numel(); ++i)
    CHECK(a.heatmap.val()[i] == b.heatmap.val()[i]);
  CHECK(poses_equal(a.final_pose, b.final_pose));
}

TEST_CASE("soft argmax: uniform map gives the grid centroid") {
  const int hh = 16, ww = 32;
  Tensor hm = Tensor::zeros({2, hh, ww});
  const Pose p = soft_argmax(hm);
  CHECK(p.frame == Frame::kHeatmapGrid);
  for (const auto& j : p.joints) {
    CHECK(j.x == doctest::Approx((ww - 1) / 2.0).epsilon(1e-12));
    CHECK(j.y == doctest::Approx((hh - 1) / 2.0).epsilon(1e-12));
    CHECK(j.confidence == doctest::Approx(1.0 / (hh * ww)).epsilon(1e-12));
  }
}

TEST_CASE("soft argmax: dominant peak and direct-evaluation oracle") {
  const int hh = 12, ww = 12;
  Tensor hm = Tensor::full({1, hh, ww}, -50.0);
  hm.at3(0, 3, 5) = 50.0;
  const Pose p = soft_argmax(hm);
  CHECK(std::fabs(p.joints[0].x - 5.0) < 1e-3);
  CHECK(std::fabs(p.joints[0].y - 3.0) < 1e-3);
  CHECK(std::fabs(p.joints[0].confidence - 1.0) < 1e-6);

  // independent expectation over the softmaxed grid
  Rng rng(21);
  Tensor noisy = rnd({1, hh, ww}, rng, -2.0, 2.0);
  double mx = noisy[0];
  for (int i = 1; i < hh * ww; ++i) mx = std::max(mx, noisy[i]);
  double z = 0.0, ex = 0.0, ey = 0.0, peak = 0.0;
  for (int y = 0; y < hh; ++y)
    for (int x = 0; x < ww; ++x) {
      const double e = std::exp(noisy.at3(0, y, x) - mx);
      z += e;
      ex += x * e;
      ey += y * e;
      peak = std::max(peak, e);
    }
  const Pose q = soft_argmax(noisy);
  CHECK(q.joints[0].x == doctest::Approx(ex / z).epsilon(1e-12));
  CHECK(q.joints[0].y == doctest::Approx(ey / z).epsilon(1e-12));
  CHECK(q.joints[0].confidence == doctest::Approx(peak / z).epsilon(1e-12));
}

TEST_CASE("soft argmax: symmetric twin peaks land midway") {
  Tensor hm = Tensor::full({1, 9, 9}, -50.0);
  hm.at3(0, 2, 2) = 50.0;
  hm.at3(0, 2, 6) = 50.0;
  const Pose p = soft_argmax(hm);
  CHECK(std::fabs(p.joints[0].x - 4.0) < 1e-12);
  CHECK(std::fabs(p.joints[0].y - 2.0) < 1e-9);
}

TEST_CASE("soft argmax: shift invariance and hull containment") {
  Rng rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor hm = rnd({3, 8, 16}, rng, -4.0, 4.0);
    const Pose a = soft_argmax(hm);
    Tensor shifted = hm.clone();
    for (std::int64_t i = 0; i < shifted.numel(); ++i) shifted[i] += 7.25;
    const Pose b = soft_argmax(shifted);
    for (int j = 0; j < 3; ++j) {
      CHECK(std::fabs(a.joints[j].x - b.joints[j].x) < 1e-9);
      CHECK(std::fabs(a.joints[j].y - b.joints[j].y) < 1e-9);
      CHECK(a.joints[j].x >= 0.0);
      CHECK(a.joints[j].x <= 15.0);
      CHECK(a.joints[j].y >= 0.0);
      CHECK(a.joints[j].y <= 7.0);
    }
  }
}

TEST_CASE("soft argmax gradients match finite differences") {
  Rng rng(47);
  const Tensor hm = rnd({2, 6, 7}, rng, -2.0, 2.0);
  auto res = test::grad_check(
      [](const std::vector<Var>& v) {
        SoftArgmaxVars sa = soft_argmax_ad(v[0]);
        return ad::sum(ad::concat_rows({sa.grid_xy, sa.conf}));
      },
      {hm}, 16, rng);
  CHECK(res.max_rel < 1e-3);
}

TEST_CASE("hard argmax: ties, agreement with soft argmax under a margin") {
  Tensor hm = Tensor::zeros({1, 8, 8});
  hm.at3(0, 3, 5) = 2.0;
  Pose p = hard_argmax(hm);
  CHECK(p.joints[0].x == 5.0);
  CHECK(p.joints[0].y == 3.0);

  // all-equal map: row-major first occurrence
  Pose flat = hard_argmax(Tensor::zeros({1, 8, 8}));
  CHECK(flat.joints[0].x == 0.0);
  CHECK(flat.joints[0].y == 0.0);

  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor m = rnd({1, 10, 10}, rng, -3.0, 3.0);
    const int px = rng.uniform_int(0, 9), py = rng.uniform_int(0, 9);
    double mx = m[0];
    for (int i = 1; i < 100; ++i) mx = std::max(mx, m[i]);
    m.at3(0, py, px) = mx + 20.0;  // exceeds everything by >= 20
    const Pose hard = hard_argmax(m), soft = soft_argmax(m);
    CHECK(std::fabs(hard.joints[0].x - soft.joints[0].x) <= 0.5);
    CHECK(std::fabs(hard.joints[0].y - soft.joints[0].y) <= 0.5);
    CHECK(hard.joints[0].confidence == doctest::Approx(soft.joints[0].confidence));
  }
}

TEST_CASE("heatmap head is linear: doubling the input doubles the scores") {
  PoseModel model(small_config(), 13);
  Rng rng(6);
  const Tensor f3 = rnd({32, 32, 32}, rng);
  Tensor f3x2 = f3.clone();
  for (std::int64_t i = 0; i < f3x2.numel(); ++i) f3x2[i] *= 2.0;
  Tape tape(false);
  const Var a = model.heatmap_forward(tape, tape.constant(f3));
  const Var b = model.heatmap_forward(tape, tape.constant(f3x2));
  // head bias is zero-initialized, and scaling by two is exact
  for (std::int64_t i = 0; i < a.val().numel(); ++i) CHECK(b.val()[i] == 2.0 * a.val()[i]);
}

TEST_CASE("cfa conv block: zero weights give zero output") {
  ModelConfig cfg = small_config();
  PoseModel model(cfg, 2);
  model.params().find("cfa.conv1.w")->value.fill(0.0);
  model.params().find("cfa.conv1.b")->value.fill(0.0);
  Rng rng(64);
  Tape tape(false);
  const PyramidVars pyr = model.backbone_forward(tape, tape.constant(rnd({1, 64, 64}, rng)));
  const PyramidVars adapted = model.cfa_forward(tape, pyr);
  for (std::int64_t i = 0; i < adapted.f1.val().numel(); ++i) CHECK(adapted.f1.val()[i] == 0.0);
}

TEST_CASE("fusion gate limits") {
  ModelConfig cfg = small_config();
  PoseModel model(cfg, 31);
  Rng rng(71);
  const Tensor crop = rnd({1, 64, 64}, rng, 0.0, 1.0);

  SUBCASE("gate forced closed: only the fine branch survives") {
    model.params().find("cfa.fuse2.attn.w")->value.fill(0.0);
    model.params().find("cfa.fuse2.attn.b")->value.fill(-1e9);
    Tape tape(false);
    const PyramidVars pyr = model.backbone_forward(tape, tape.constant(crop));
    const PyramidVars adapted = model.cfa_forward(tape, pyr);
    // reference: relu(conv3x3(F2)) with the fusion's own final conv
    const Parameter* w = model.params().find("cfa.fuse2.conv.w");
    const Parameter* b = model.params().find("cfa.fuse2.conv.b");
    Tape ref(false);
    const Var want = ad::relu(ad::conv2d(ref.constant(pyr.f2.val()), ref.constant(w->value),
                                         ref.constant(b->value), 1, 1));
    REQUIRE(want.val().same_shape(adapted.f2.val()));
    for (std::int64_t i = 0; i < want.val().numel(); ++i)
      CHECK(adapted.f2.val()[i] == want.val()[i]);
  }

  SUBCASE("gate saturated open: the fine map no longer matters") {
    model.params().find("cfa.fuse2.attn.b")->value.fill(1e9);
    model.params().find("cfa.fuse3.attn.b")->value.fill(1e9);
    Tape t1(false);
    const PyramidVars pyr = model.backbone_forward(t1, t1.constant(crop));
    const PyramidVars a_full = model.cfa_forward(t1, pyr);
    const PyramidVars zeroed{pyr.f1, pyr.f2, t1.constant(Tensor::zeros(pyr.f3.val().shape()))};
    const PyramidVars a_zero = model.cfa_forward(t1, zeroed);
    for (std::int64_t i = 0; i < a_full.f3.val().numel(); ++i)
      CHECK(a_full.f3.val()[i] == a_zero.f3.val()[i]);
  }
}

TEST_CASE("cfa gradients match finite differences end to end") {
  ModelConfig cfg = small_config();
  PoseModel model(cfg, 77);
  Rng rng(81);
  const Tensor f1 = rnd({64, 8, 8}, rng), f2 = rnd({32, 16, 16}, rng), f3 = rnd({32, 32, 32}, rng);
  auto res = test::grad_check(
      [&model](const std::vector<Var>& v) {
        Tape tape(true);
        const PyramidVars adapted = model.cfa_forward(tape, {v[0], v[1], v[2]});
        return ad::sum(adapted.f3);
      },
      {f1, f2, f3}, 12, rng);
  CHECK(res.max_rel < 1e-3);
}

TEST_CASE("resgcn attention block: channel plan and path isolation") {
  ModelConfig cfg = small_config();
  PoseModel model(cfg, 19);
  Rng rng(91);
  const int n = 12;
  const Tensor feats = rnd({128, n}, rng), sampled = rnd({64, n}, rng);
  Tape tape(false);
  const Var adj = tape.constant(model.adjacency_t());

  auto rab_params = [&](const std::string& base) {
    auto* P = &model.params();
    return RabParams{
        {P->find(base + ".main1.w_self"), P->find(base + ".main1.w_neigh"),
         P->find(base + ".main1.b")},
        {P->find(base + ".main2.w_self"), P->find(base + ".main2.w_neigh"),
         P->find(base + ".main2.b")},
        {P->find(base + ".skip.w_self"), P->find(base + ".skip.w_neigh"),
         P->find(base + ".skip.b")},
        {P->find(base + ".attn.wq"), P->find(base + ".attn.bq"), P->find(base + ".attn.wk"),
         P->find(base + ".attn.bk"), P->find(base + ".attn.wv"), P->find(base + ".attn.bv")}};
  };
  const RabParams rab = rab_params("gcn.rab1");

  // block 1 concatenates the 128-wide embedding with 64 sampled channels
  const Var out =
      resgcn_attention_block(tape, rab, tape.constant(feats), tape.constant(sampled), adj);
  CHECK(out.val().shape() == std::vector<int>({256, n}));

  // zero sampled features and a dead main path leave attention(skip(x))
  model.params().find("gcn.rab1.main2.w_self")->value.fill(0.0);
  model.params().find("gcn.rab1.main2.w_neigh")->value.fill(0.0);
  model.params().find("gcn.rab1.main2.b")->value.fill(0.0);
  const Tensor zeros = Tensor::zeros({64, n});
  Tape t2(false);
  const Var adj2 = t2.constant(model.adjacency_t());
  const Var got = resgcn_attention_block(t2, rab, t2.constant(feats), t2.constant(zeros), adj2);
  const Var x = ad::concat_rows({t2.constant(feats), t2.constant(zeros)});
  const Var want = self_attention(t2, rab.attn, gcn_layer(t2, rab.skip, x, adj2));
  for (std::int64_t i = 0; i < want.val().numel(); ++i) CHECK(got.val()[i] == want.val()[i]);

  // gradients through a fresh block
  PoseModel fresh(cfg, 20);
  auto res = test::grad_check(
      [&fresh](const std::vector<Var>& v) {
        Tape t(true);
        auto* P = &fresh.params();
        RabParams rp{
            {P->find("gcn.rab1.main1.w_self"), P->find("gcn.rab1.main1.w_neigh"),
             P->find("gcn.rab1.main1.b")},
            {P->find("gcn.rab1.main2.w_self"), P->find("gcn.rab1.main2.w_neigh"),
             P->find("gcn.rab1.main2.b")},
            {P->find("gcn.rab1.skip.w_self"), P->find("gcn.rab1.skip.w_neigh"),
             P->find("gcn.rab1.skip.b")},
            {P->find("gcn.rab1.attn.wq"), P->find("gcn.rab1.attn.bq"),
             P->find("gcn.rab1.attn.wk"), P->find("gcn.rab1.attn.bk"),
             P->find("gcn.rab1.attn.wv"), P->find("gcn.rab1.attn.bv")}};
        return ad::sum(
            resgcn_attention_block(t, rp, v[0], v[1], t.constant(fresh.adjacency_t())));
      },
      {feats, sampled}, 12, rng);
  CHECK(res.max_rel < 1e-3);
}

TEST_CASE("gcn layer and attention gradients match finite differences") {
  ModelConfig cfg = small_config();
  PoseModel model(cfg, 23);
  Rng rng(95);
  const Tensor x = rnd({3, 12}, rng);
  auto res = test::grad_check(
      [&model](const std::vector<Var>& v) {
        Tape tape(true);
        GcnParams p{model.params().find("gcn.embed1.w_self"),
                    model.params().find("gcn.embed1.w_neigh"),
                    model.params().find("gcn.embed1.b")};
        return ad::sum(gcn_layer(tape, p, v[0], tape.constant(model.adjacency_t())));
      },
      {x}, 12, rng);
  CHECK(res.max_rel < 1e-3);

  const Tensor z = rnd({256, 12}, rng);
  res = test::grad_check(
      [&model](const std::vector<Var>& v) {
        Tape tape(true);
        AttnParams p{model.params().find("gcn.rab1.attn.wq"),
                     model.params().find("gcn.rab1.attn.bq"),
                     model.params().find("gcn.rab1.attn.wk"),
                     model.params().find("gcn.rab1.attn.bk"),
                     model.params().find("gcn.rab1.attn.wv"),
                     model.params().find("gcn.rab1.attn.bv")};
        return ad::sum(self_attention(tape, p, v[0]));
      },
      {z}, 12, rng);
  CHECK(res.max_rel < 1e-3);
}

TEST_CASE("zero-residual initialization: the untrained corrector is the identity") {
  PoseModel model(small_config(), 321);
  Rng rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    Tape tape(false);
    const TraceVars trace = model.forward(tape, tape.constant(rnd({1, 64, 64}, rng, 0.0, 1.0)));
    CHECK(poses_equal(trace.pose1, trace.init.norm_xy));
    CHECK(poses_equal(trace.pose2, trace.init.norm_xy));
    CHECK(poses_equal(trace.final_pose, trace.init.norm_xy));
  }
}

TEST_CASE("full-stack gradient flows from the crop to the final pose") {
  PoseModel model(small_config(), 555);
  Rng rng(111);
  const Tensor crop = rnd({1, 64, 64}, rng, 0.0, 1.0);
  // make the correction heads non-trivial so the graph path is live
  Rng wrng(7);
  for (const char* name : {"gcn.head1.w", "gcn.head2.w", "gcn.head3.w"}) {
    Tensor& w = model.params().find(name)->value;
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = wrng.uniform(-0.01, 0.01);
  }
  auto res = test::grad_check(
      [&model](const std::vector<Var>& v) {
        Tape tape(true);
        const TraceVars trace = model.forward(tape, v[0]);
        return ad::sum(ad::abs(trace.final_pose));
      },
      {crop}, 10, rng);
  CHECK(res.max_rel < 1e-3);
  CHECK(res.checked == 10);
}

TEST_CASE("joint relabeling permutes the outputs consistently") {
  // permuting the skeleton (edges, sigmas, names) together with the heatmap
  // head rows must permute every output pose the same way
  const std::vector<int> perm{3, 1, 0, 2, 5, 4, 7, 6, 9, 11, 8, 10};
  ModelConfig cfg = small_config();
  PoseModel model(cfg, 222);

  ModelConfig pcfg = cfg;
  std::vector<int> inv(12);
  for (int i = 0; i < 12; ++i) inv[perm[i]] = i;
  pcfg.skeleton.edges.clear();
  for (auto [a, b] : cfg.skeleton.edges) pcfg.skeleton.edges.emplace_back(inv[a], inv[b]);
  pcfg.skeleton.flip_pairs.clear();
  for (auto [l, r] : cfg.skeleton.flip_pairs) pcfg.skeleton.flip_pairs.emplace_back(inv[l], inv[r]);
  for (int i = 0; i < 12; ++i) {
    pcfg.skeleton.oks_sigmas[inv[i]] = cfg.skeleton.oks_sigmas[i];
    pcfg.skeleton.joint_names[inv[i]] = cfg.skeleton.joint_names[i];
  }
  PoseModel pmodel(pcfg, 222);
  for (const auto& p : model.params().items()) {
    Parameter* q = pmodel.params().find(p->name);
    REQUIRE(q != nullptr);
    if (p->name == "heatmap_head.w" || p->name == "heatmap_head.b") {
      // permute the head's output channels
      const int slab = static_cast<int>(p->value.numel()) / 12;
      for (int i = 0; i < 12; ++i)
        for (int s = 0; s < slab; ++s) q->value[inv[i] * slab + s] = p->value[i * slab + s];
    } else {
      for (std::int64_t i = 0; i < p->value.numel(); ++i) q->value[i] = p->value[i];
    }
  }

  Rng rng(131);
  const Tensor crop = rnd({1, 64, 64}, rng, 0.0, 1.0);
  Tape t1(false), t2(false);
  const TraceVars a = model.forward(t1, t1.constant(crop));
  const TraceVars b = pmodel.forward(t2, t2.constant(crop));
  for (int j = 0; j < 12; ++j) {
    CHECK(std::fabs(b.final_pose.val().at2(0, inv[j]) - a.final_pose.val().at2(0, j)) < 1e-9);
    CHECK(std::fabs(b.final_pose.val().at2(1, inv[j]) - a.final_pose.val().at2(1, j)) < 1e-9);
  }
}

TEST_CASE("couple refiner: identity at init, swap equivariance, shapes") {
  PoseModel model(small_config(), 77);
  Rng rng(141);
  const Tensor xy_a = rnd({2, 12}, rng, -0.8, 0.8), xy_b = rnd({2, 12}, rng, -0.8, 0.8);
  const Tensor conf_a = rnd({1, 12}, rng, 0.0, 1.0), conf_b = rnd({1, 12}, rng, 0.0, 1.0);
  const Tensor f3_a = rnd({32, 32, 32}, rng), f3_b = rnd({32, 32, 32}, rng);

  Tape tape(false);
  PoseModel::CoupleInstance ia{tape.constant(xy_a), tape.constant(conf_a), tape.constant(f3_a)};
  PoseModel::CoupleInstance ib{tape.constant(xy_b), tape.constant(conf_b), tape.constant(f3_b)};
  auto [ra, rb] = model.couple_forward(tape, ia, ib);
  CHECK(ra.val().shape() == std::vector<int>({2, 12}));
  CHECK(rb.val().shape() == std::vector<int>({2, 12}));
  // zero-initialized displacement head: exact identity
  for (std::int64_t i = 0; i < xy_a.numel(); ++i) {
    CHECK(ra.val()[i] == xy_a[i]);
    CHECK(rb.val()[i] == xy_b[i]);
  }

  // make the head non-trivial, then swap the instances
  Tensor& hw = model.params().find("couple.head.w")->value;
  Rng wrng(5);
  for (std::int64_t i = 0; i < hw.numel(); ++i) hw[i] = wrng.uniform(-0.05, 0.05);
  Tape t1(false);
  auto [sa, sb] = model.couple_forward(
      t1, {t1.constant(xy_a), t1.constant(conf_a), t1.constant(f3_a)},
      {t1.constant(xy_b), t1.constant(conf_b), t1.constant(f3_b)});
  Tape t2(false);
  auto [tb, ta] = model.couple_forward(
      t2, {t2.constant(xy_b), t2.constant(conf_b), t2.constant(f3_b)},
      {t2.constant(xy_a), t2.constant(conf_a), t2.constant(f3_a)});
  for (std::int64_t i = 0; i < sa.val().numel(); ++i) {
    CHECK(std::fabs(sa.val()[i] - ta.val()[i]) < 1e-12);
    CHECK(std::fabs(sb.val()[i] - tb.val()[i]) < 1e-12);
  }
}

TEST_CASE("couple refiner gradients match finite differences") {
  PoseModel model(small_config(), 88);
  Tensor& hw = model.params().find("couple.head.w")->value;
  Rng wrng(3);
  for (std::int64_t i = 0; i < hw.numel(); ++i) hw[i] = wrng.uniform(-0.05, 0.05);
  Rng rng(151);
  const Tensor xy_a = rnd({2, 12}, rng, -0.7, 0.7), xy_b = rnd({2, 12}, rng, -0.7, 0.7);
  const Tensor conf = rnd({1, 12}, rng, 0.0, 1.0);
  const Tensor f3 = rnd({32, 32, 32}, rng);
  auto res = test::grad_check(
      [&model, &conf, &f3](const std::vector<Var>& v) {
        Tape tape(true);
        auto [ra, rb] = model.couple_forward(
            tape, {v[0], tape.constant(conf), tape.constant(f3)},
            {v[1], tape.constant(conf), tape.constant(f3)});
        return ad::sum(ad::abs(ra) + ad::abs(rb));
      },
      {xy_a, xy_b}, 12, rng);
  CHECK(res.max_rel < 1e-3);
}

TEST_CASE("checkpoint round trip preserves every parameter bit") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "posekit_test_ckpt.bin";
  ModelConfig cfg = small_config();
  PoseModel model(cfg, 2024);
  CheckpointMeta meta;
  meta.epoch = 3;
  meta.global_step = 123;
  meta.has_adam = true;
  Rng rng(7);
  for (const auto& p : model.params().items())
    for (std::int64_t i = 0; i < p->adam_m.numel(); ++i) p->adam_m[i] = rng.uniform();
  save_checkpoint(path, model, meta);

  PoseModel other(cfg, 999);  // different init, same architecture
  const CheckpointMeta loaded = load_checkpoint(path, other);
  CHECK(loaded.epoch == 3);
  CHECK(loaded.global_step == 123);
  for (const auto& p : model.params().items()) {
    const Parameter* q = other.params().find(p->name);
    for (std::int64_t i = 0; i < p->value.numel(); ++i) {
      CHECK(p->value[i] == q->value[i]);
      CHECK(p->adam_m[i] == q->adam_m[i]);
    }
  }

  // architecture mismatch is reported with the offending layer
  ModelConfig narrow = cfg;
  narrow.embed_channels = 64;
  PoseModel wrong(narrow, 1);
  CHECK_THROWS_WITH_AS(load_checkpoint(path, wrong),
                       doctest::Contains("shape mismatch for layer"), DataError);
  fs::remove(path);
}

TEST_CASE("ablation flags change the parameter set coherently") {
  ModelConfig cfg = small_config();
  cfg.ablation.progressive = false;
  PoseModel single(cfg, 5);
  CHECK(single.params().find("gcn.rab_single.main1.w_self") != nullptr);
  CHECK(single.params().find("gcn.rab1.main1.w_self") == nullptr);
  Rng rng(166);
  Tape tape(false);
  const TraceVars trace = single.forward(tape, tape.constant(rnd({1, 64, 64}, rng, 0.0, 1.0)));
  CHECK(poses_equal(trace.pose1, trace.final_pose));
  CHECK(poses_equal(trace.pose2, trace.final_pose));
  CHECK(poses_equal(trace.final_pose, trace.init.norm_xy));  // zero-residual here too

  ModelConfig no_guide = small_config();
  no_guide.ablation.image_guided = false;
  PoseModel blind(no_guide, 5);
  // same parameter set as the full model: the switch only zeroes features
  PoseModel full(small_config(), 5);
  CHECK(blind.params().items().size() == full.params().items().size());

  ModelConfig no_fusion = small_config();
  no_fusion.ablation.fusion_enabled = false;
  PoseModel plain(no_fusion, 5);
  CHECK(plain.params().find("cfa.plain2.w") != nullptr);
  CHECK(plain.params().find("cfa.fuse2.conv.w") == nullptr);
  Tape t2(false);
  const TraceVars t = plain.forward(t2, t2.constant(rnd({1, 64, 64}, rng, 0.0, 1.0)));
  CHECK(t.final_pose.val().all_finite());

  ModelConfig one_scale = small_config();
  one_scale.ablation.multi_scale_features = false;
  PoseModel mono(one_scale, 5);
  // block 1 now samples the fine map: 128 + 32 input channels
  CHECK(mono.params().find("gcn.rab1.main1.w_self")->value.shape() ==
        std::vector<int>({256, 160}));
}

}  // TEST_SUITE
