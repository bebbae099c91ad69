#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "posekit/errors.hpp"
#include "posekit/rng.hpp"
#include "posekit/skeleton.hpp"

using namespace posekit;

namespace {

SkeletonSpec tiny(int n, std::vector<std::pair<int, int>> edges) {
  SkeletonSpec s;
  s.name = "tiny";
  s.num_joints = n;
  s.edges = std::move(edges);
  s.oks_sigmas.assign(n, 0.05);
  return s;
}

}  // namespace

TEST_SUITE("skeleton") {

TEST_CASE("adjacency of the smallest graphs") {
  const AdjacencyMatrix a2 = build_adjacency(tiny(2, {{0, 1}}));
  CHECK(a2.entries.at2(0, 0) == 1.0);
  CHECK(a2.entries.at2(0, 1) == 1.0);
  CHECK(a2.entries.at2(1, 0) == 1.0);
  CHECK(a2.entries.at2(1, 1) == 1.0);

  const AdjacencyMatrix chain = build_adjacency(tiny(3, {{0, 1}, {1, 2}}));
  const double want[3][3] = {{1, 1, 0}, {1, 1, 1}, {0, 1, 1}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(chain.entries.at2(i, j) == want[i][j]);
}

TEST_CASE("bundled 12-joint skeleton: nnz count and symmetry") {
  const SkeletonSpec sk = SkeletonSpec::ocpose12();
  CHECK(sk.num_joints == 12);
  const AdjacencyMatrix adj = build_adjacency(sk);
  // diagonal ones plus both directions of every limb
  CHECK(adj.nnz() == 12 + 2 * static_cast<int>(sk.edges.size()));
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) CHECK(adj.entries.at2(i, j) == adj.entries.at2(j, i));
}

TEST_CASE("adjacency is invariant to edge order and direction") {
  const SkeletonSpec sk = SkeletonSpec::ocpose12();
  SkeletonSpec shuffled = sk;
  std::reverse(shuffled.edges.begin(), shuffled.edges.end());
  for (auto& e : shuffled.edges) std::swap(e.first, e.second);
  const AdjacencyMatrix a = build_adjacency(sk), b = build_adjacency(shuffled);
  for (std::int64_t i = 0; i < a.entries.numel(); ++i) CHECK(a.entries[i] == b.entries[i]);
}

TEST_CASE("couple graph: blocks, interaction edges, degrees, nnz") {
  SUBCASE("two-joint example") {
    const CoupleGraphSpec c = build_couple_graph(tiny(2, {{0, 1}}));
    CHECK(c.adjacency.size == 4);
    CHECK(c.adjacency.entries.at2(0, 2) == 1.0);
    CHECK(c.adjacency.entries.at2(1, 3) == 1.0);
    CHECK(c.adjacency.entries.at2(0, 3) == 0.0);
    CHECK(c.adjacency.entries.at2(1, 2) == 0.0);
  }
  SUBCASE("bundled skeleton") {
    const SkeletonSpec sk = SkeletonSpec::ocpose12();
    const AdjacencyMatrix single = build_adjacency(sk);
    const CoupleGraphSpec c = build_couple_graph(sk);
    const int n = sk.num_joints;
    // top-left block equals bottom-right block
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        CHECK(c.adjacency.entries.at2(i, j) == single.entries.at2(i, j));
        CHECK(c.adjacency.entries.at2(n + i, n + j) == single.entries.at2(i, j));
      }
    // every node gains exactly its counterpart
    for (int i = 0; i < 2 * n; ++i)
      CHECK(c.adjacency.degree(i) == single.degree(i % n) + 1);
    CHECK(c.adjacency.nnz() == 2 * single.nnz() + 2 * n);
    REQUIRE(c.interaction_edges.size() == static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      CHECK(c.interaction_edges[i] == std::make_pair(i, i + n));
  }
}

TEST_CASE("topology validation errors") {
  CHECK_THROWS_AS(build_adjacency(tiny(3, {{0, 5}})), ConfigError);
  CHECK_THROWS_AS(build_adjacency(tiny(3, {{1, 1}})), ConfigError);
  CHECK_THROWS_AS(build_adjacency(tiny(3, {{0, 1}, {1, 0}})), ConfigError);
  SkeletonSpec bad_flip = tiny(4, {{0, 1}});
  bad_flip.flip_pairs = {{0, 1}, {1, 2}};
  CHECK_THROWS_AS(bad_flip.validate(), ConfigError);
  SkeletonSpec bad_sigma = tiny(3, {});
  bad_sigma.oks_sigmas = {0.1, -0.2, 0.1};
  CHECK_THROWS_AS(bad_sigma.validate(), ConfigError);
  bad_sigma.oks_sigmas = {0.1, 0.1};
  CHECK_THROWS_AS(bad_sigma.validate(), ConfigError);
}

TEST_CASE("normalization examples and round trip") {
  const BoundingBox box{0, 0, 64, 64};
  Pose p;
  p.frame = Frame::kCropPixels;
  p.joints = {{32, 32, 0.9}, {0, 0, 0.4}};
  const Pose n = normalize_pose(p, box);
  CHECK(n.frame == Frame::kNormalized);
  CHECK(n.joints[0].x == 0.0);
  CHECK(n.joints[0].y == 0.0);
  CHECK(n.joints[1].x == -1.0);
  CHECK(n.joints[1].y == -1.0);
  CHECK(n.joints[0].confidence == 0.9);  // confidence untouched

  Pose q;
  q.frame = Frame::kNormalized;
  q.joints = {{0, 0, 1.0}, {1, 1, 1.0}};
  const Pose d = denormalize_pose(q, {10, 20, 30, 40});
  CHECK(d.joints[0].x == doctest::Approx(20.0));
  CHECK(d.joints[0].y == doctest::Approx(30.0));
  CHECK(d.joints[1].x == doctest::Approx(30.0));
  CHECK(d.joints[1].y == doctest::Approx(40.0));

  Rng rng(5);
  Pose random;
  random.frame = Frame::kSourcePixels;
  for (int i = 0; i < 100; ++i)
    random.joints.push_back({rng.uniform(-50, 150), rng.uniform(-20, 90), rng.uniform()});
  const BoundingBox rb{3.5, -2.25, 77.0, 41.5};
  const Pose rt = denormalize_pose(normalize_pose(random, rb), rb);
  for (int i = 0; i < 100; ++i) {
    CHECK(std::fabs(rt.joints[i].x - random.joints[i].x) < 1e-9);
    CHECK(std::fabs(rt.joints[i].y - random.joints[i].y) < 1e-9);
  }
}

TEST_CASE("normalization is affine in the coordinates") {
  Rng rng(17);
  const BoundingBox box{5, 8, 60, 50};
  for (int trial = 0; trial < 25; ++trial) {
    const double alpha = rng.uniform();
    Pose p, q, blend;
    p.joints = {{rng.uniform(0, 100), rng.uniform(0, 100), 1.0}};
    q.joints = {{rng.uniform(0, 100), rng.uniform(0, 100), 1.0}};
    blend.joints = {{alpha * p.joints[0].x + (1 - alpha) * q.joints[0].x,
                     alpha * p.joints[0].y + (1 - alpha) * q.joints[0].y, 1.0}};
    const Pose np = normalize_pose(p, box), nq = normalize_pose(q, box),
               nb = normalize_pose(blend, box);
    CHECK(std::fabs(nb.joints[0].x -
                    (alpha * np.joints[0].x + (1 - alpha) * nq.joints[0].x)) < 1e-12);
    CHECK(std::fabs(nb.joints[0].y -
                    (alpha * np.joints[0].y + (1 - alpha) * nq.joints[0].y)) < 1e-12);
  }
}

TEST_CASE("degenerate boxes are rejected") {
  Pose p;
  p.joints = {{1, 1, 1}};
  CHECK_THROWS_AS(normalize_pose(p, {5, 5, 5, 9}), NumericError);
  CHECK_THROWS_AS(denormalize_pose(p, {5, 5, 9, 5}), NumericError);
}

TEST_CASE("heatmap grid mapping round trip and cell centers") {
  for (int size : {8, 17, 32}) {
    for (double g : {0.0, 1.0, size / 2.0, size - 1.0}) {
      const double v = grid_to_normalized(g, size);
      CHECK(std::fabs(normalized_to_grid(v, size) - g) < 1e-12);
    }
    CHECK(grid_to_normalized(0, size) == doctest::Approx(1.0 / size - 1.0));
    CHECK(grid_to_normalized((size - 1) / 2.0, size) == doctest::Approx(0.0));
  }
}

TEST_CASE("row-normalized adjacency columns sum the neighborhood weights") {
  const SkeletonSpec sk = SkeletonSpec::ocpose12();
  const AdjacencyMatrix adj = build_adjacency(sk);
  const Tensor t = rownorm_adjacency_t(adj);
  // column i of the transposed matrix is row i of D^-1 A: entries 1/deg(i)
  for (int i = 0; i < adj.size; ++i) {
    double col = 0.0;
    for (int j = 0; j < adj.size; ++j) col += t.at2(j, i);
    CHECK(col == doctest::Approx(1.0));
  }
}

TEST_CASE("skeleton json round trip") {
  const SkeletonSpec sk = SkeletonSpec::ocpose12();
  const SkeletonSpec back = skeleton_from_json(skeleton_to_json(sk));
  CHECK(back.num_joints == sk.num_joints);
  CHECK(back.edges == sk.edges);
  CHECK(back.flip_pairs == sk.flip_pairs);
  CHECK(back.oks_sigmas == sk.oks_sigmas);
  CHECK(back.joint_names == sk.joint_names);
  CHECK_THROWS_AS(skeleton_from_json("{"), DataError);
  CHECK_THROWS_AS(skeleton_from_json("{\"joint_names\": [\"a\"]}"), DataError);
}

}  // TEST_SUITE
