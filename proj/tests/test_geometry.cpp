#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "vg3d/geometry.hpp"
#include "vg3d/oracles.hpp"

using namespace vg3d;

TEST_CASE("unproject principal ray and translation") {
  DepthMap dm;
  dm.height = 3;
  dm.width = 3;
  dm.d.assign(9, 0.f);
  CameraIntrinsics k{100, 100, 1, 1};
  dm.at(1, 1) = 2.f;
  Pose identity;
  auto pm = unproject(dm, k, identity);
  CHECK(pm.is_valid(1, 1));
  CHECK(pm.at(1, 1).x == doctest::Approx(0.0));
  CHECK(pm.at(1, 1).y == doctest::Approx(0.0));
  CHECK(pm.at(1, 1).z == doctest::Approx(2.0));
  CHECK_FALSE(pm.is_valid(0, 0));

  Pose shifted;
  shifted.t = {1.0, -2.0, 0.5};
  auto pm2 = unproject(dm, k, shifted);
  CHECK(pm2.at(1, 1).x == doctest::Approx(1.0));
  CHECK(pm2.at(1, 1).y == doctest::Approx(-2.0));
  CHECK(pm2.at(1, 1).z == doctest::Approx(2.5));
}

TEST_CASE("unproject pinhole formula hand case") {
  // fx=fy=100, cx=cy=0, pixel (u=100, v=0), depth 1 -> (1, 0, 1).
  DepthMap dm;
  dm.height = 1;
  dm.width = 101;
  dm.d.assign(101, 0.f);
  dm.at(0, 100) = 1.f;
  CameraIntrinsics k{100, 100, 0, 0};
  auto pm = unproject(dm, k, Pose{});
  CHECK(pm.at(0, 100).x == doctest::Approx(1.0));
  CHECK(pm.at(0, 100).y == doctest::Approx(0.0));
  CHECK(pm.at(0, 100).z == doctest::Approx(1.0));

  auto px = project({1.0, 0.0, 1.0}, k, Pose{});
  CHECK(px.u == doctest::Approx(100.0));
  CHECK(px.v == doctest::Approx(0.0));
  CHECK(px.d == doctest::Approx(1.0));
}

TEST_CASE("project rejects points behind the camera") {
  CameraIntrinsics k{100, 100, 0, 0};
  CHECK_THROWS_AS(project({0, 0, 0}, k, Pose{}), std::runtime_error);
  CHECK_THROWS_AS(project({0, 0, -1}, k, Pose{}), std::runtime_error);
}

TEST_CASE("project inverts unproject on random pixels") {
  Rng rng(101);
  CameraIntrinsics k{80, 120, 31.5, 23.5};
  for (int trial = 0; trial < 200; ++trial) {
    Pose pose;
    // Random rotation from three Rodrigues factors.
    for (int axis = 0; axis < 3; ++axis) {
      Rng sub = rng.fork(static_cast<std::uint64_t>(trial * 3 + axis));
      Pose tmp = perturb_pose(Pose{}, 0.0, 0.5, sub);
      pose = compose_rotation(tmp.rot, pose);
    }
    pose.t = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    int u = static_cast<int>(rng.uniform_int(64));
    int v = static_cast<int>(rng.uniform_int(48));
    double d = rng.uniform(0.1, 10.0);
    DepthMap dm;
    dm.height = 48;
    dm.width = 64;
    dm.d.assign(48 * 64, 0.f);
    dm.at(v, u) = static_cast<float>(d);
    auto pm = unproject(dm, k, pose);
    auto px = project(pm.at(v, u), k, pose);
    CHECK(std::abs(px.u - u) <= 1e-6);
    CHECK(std::abs(px.v - v) <= 1e-6);
    CHECK(std::abs(px.d - dm.at(v, u)) <= 1e-6);
  }
}

TEST_CASE("knn basics and tie rule") {
  std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {10, 0, 0}};
  auto nn = knn({{0, 0, 0}}, pts, 2);
  REQUIRE(nn.size() == 1);
  CHECK(nn[0] == std::vector<int>{0, 1});

  auto all = knn({{0.2, 0, 0}}, pts, 3);
  CHECK(all[0] == std::vector<int>{0, 1, 2});

  // Two equidistant points: smaller index first.
  std::vector<Vec3> sym = {{-1, 0, 0}, {1, 0, 0}};
  auto tie = knn({{0, 0, 0}}, sym, 2);
  CHECK(tie[0] == std::vector<int>{0, 1});

  CHECK_THROWS_AS(knn({{0, 0, 0}}, sym, 3), std::runtime_error);
}

TEST_CASE("knn matches the brute-force oracle") {
  Rng rng(202);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 5 + static_cast<int>(rng.uniform_int(60));
    std::vector<Vec3> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) p = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    std::vector<Vec3> queries(5);
    for (auto& q : queries) q = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    int k = 1 + static_cast<int>(rng.uniform_int(n));
    auto fast = knn(queries, pts, k);
    auto slow = oracle::knn_brute(queries, pts, k);
    CHECK(fast == slow);
  }
}

TEST_CASE("fps basics") {
  std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {10, 0, 0}};
  CHECK(fps(pts, 2, 0) == std::vector<int>{0, 2});
  CHECK(fps(pts, 1, 1) == std::vector<int>{1});
  auto all = fps(pts, 3, 0);
  std::vector<int> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2});
  CHECK_THROWS_AS(fps(pts, 4, 0), std::runtime_error);
  CHECK_THROWS_AS(fps(pts, 0, 0), std::runtime_error);
}

TEST_CASE("fps matches the brute-force greedy oracle") {
  Rng rng(303);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 3 + static_cast<int>(rng.uniform_int(40));
    std::vector<Vec3> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) p = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    int m = 1 + static_cast<int>(rng.uniform_int(n));
    int seed = static_cast<int>(rng.uniform_int(n));
    CHECK(fps(pts, m, seed) == oracle::fps_brute(pts, m, seed));
  }
}

TEST_CASE("mask_to_aabb") {
  std::vector<Vec3> coords = {{0, 0, 0}, {1, 2, 3}, {0.5, 0.5, 0.5}};
  std::vector<std::uint8_t> mask = {1, 1, 0};
  auto box = mask_to_aabb(mask, coords);
  CHECK(box.mn.x == 0.0);
  CHECK(box.mx.y == 2.0);
  CHECK(box.mx.z == 3.0);

  // Adding an interior point leaves the hull unchanged.
  std::vector<std::uint8_t> mask2 = {1, 1, 1};
  auto box2 = mask_to_aabb(mask2, coords);
  CHECK(box2.mn.x == box.mn.x);
  CHECK(box2.mx.z == box.mx.z);

  std::vector<std::uint8_t> single = {0, 1, 0};
  auto degenerate = mask_to_aabb(single, coords);
  CHECK(degenerate.mn.x == degenerate.mx.x);
  CHECK(degenerate.volume() == 0.0);

  std::vector<std::uint8_t> empty = {0, 0, 0};
  CHECK_THROWS_AS(mask_to_aabb(empty, coords), std::runtime_error);
}

TEST_CASE("iou3 and giou3 fixtures") {
  AABB3 unit{{0, 0, 0}, {1, 1, 1}};
  CHECK(iou3(unit, unit) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(giou3(unit, unit) == doctest::Approx(1.0).epsilon(1e-12));

  // Disjoint unit cubes: hull volume 3, union 2 -> giou = -1/3.
  AABB3 far{{2, 0, 0}, {3, 1, 1}};
  CHECK(iou3(unit, far) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(giou3(unit, far) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));

  // Half-overlap pair: intersection 0.5, union 1.5 -> IoU 1/3.
  AABB3 half{{0.5, 0, 0}, {1.5, 1, 1}};
  CHECK(iou3(unit, half) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("giou3 properties") {
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    auto rand_box = [&]() {
      Vec3 a{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
      Vec3 b{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
      return AABB3{{std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)},
                   {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)}};
    };
    AABB3 a = rand_box(), b = rand_box();
    double g = giou3(a, b), i = iou3(a, b);
    CHECK(g <= i + 1e-12);
    CHECK(g == doctest::Approx(giou3(b, a)).epsilon(1e-12));
    CHECK(g > -1.0);
    CHECK(g <= 1.0);
  }
}

TEST_CASE("giou3 agrees with Monte Carlo volume oracle") {
  Rng rng(505);
  AABB3 a{{0, 0, 0}, {1.5, 1, 2}};
  AABB3 b{{0.5, -0.5, 1}, {2, 1.2, 3}};
  double mc = oracle::giou_monte_carlo(a, b, 400000, rng);
  CHECK(std::abs(mc - giou3(a, b)) < 0.02);
}

TEST_CASE("perturb_pose zero sigma is the identity") {
  Pose p;
  p.t = {1, 2, 3};
  p.rot = {0, -1, 0, 1, 0, 0, 0, 0, 1};
  Rng rng(606);
  Pose q = perturb_pose(p, 0, 0, rng);
  CHECK(q.t.x == p.t.x);
  for (int i = 0; i < 9; ++i) CHECK(q.rot[static_cast<std::size_t>(i)] == p.rot[static_cast<std::size_t>(i)]);
}

TEST_CASE("perturb_pose keeps rotations orthonormal") {
  Rng rng(707);
  Pose p;
  for (int trial = 0; trial < 50; ++trial) {
    p = perturb_pose(p, 0.1, 0.3, rng);
    CHECK(rotation_error(p.rot) < 1e-6);
  }
}

TEST_CASE("perturb_pose translation noise is unbiased") {
  Rng rng(808);
  const double sigma_t = 0.2;
  const int n = 10000;
  Vec3 mean{};
  for (int i = 0; i < n; ++i) {
    Pose q = perturb_pose(Pose{}, sigma_t, 0.0, rng);
    mean += q.t;
  }
  mean = mean * (1.0 / n);
  double bound = 3.0 * sigma_t / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean.x) < bound);
  CHECK(std::abs(mean.y) < bound);
  CHECK(std::abs(mean.z) < bound);
}

TEST_CASE("perturb_depth zero sigma and invalid pixels") {
  DepthMap dm;
  dm.height = 2;
  dm.width = 2;
  dm.d = {1.f, 0.f, 2.f, 0.f};
  Rng rng(909);
  auto same = perturb_depth(dm, 0.0, rng);
  CHECK(same.d == dm.d);
  auto noisy = perturb_depth(dm, 0.5, rng);
  CHECK(noisy.d[1] == 0.f);
  CHECK(noisy.d[3] == 0.f);
  CHECK(noisy.d[0] != dm.d[0]);
}

TEST_CASE("perturb_depth noise variance is calibrated") {
  const int n = 100000;
  DepthMap dm;
  dm.height = 1;
  dm.width = n;
  dm.d.assign(n, 100.f);  // far from the clamp at 0
  const double sigma = 0.05;
  Rng rng(1010);
  auto noisy = perturb_depth(dm, sigma, rng);
  double mean = 0;
  for (int i = 0; i < n; ++i) mean += noisy.d[static_cast<std::size_t>(i)] - 100.0;
  mean /= n;
  double var = 0;
  for (int i = 0; i < n; ++i) {
    double d = (noisy.d[static_cast<std::size_t>(i)] - 100.0) - mean;
    var += d * d;
  }
  var /= n - 1;
  CHECK(std::abs(var - sigma * sigma) < 0.05 * sigma * sigma);
}
