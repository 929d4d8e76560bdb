#pragma once

// Brute-force reference implementations used by the test suites and the
// `oracle` subcommand. Everything here is deliberately independent of the
// production paths it checks: exhaustive search, plain greedy loops, and
// Monte Carlo volume estimation only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "vg3d/common.hpp"
#include "vg3d/geometry.hpp"
#include "vg3d/hungarian.hpp"

namespace vg3d::oracle {

inline std::vector<std::vector<int>> knn_brute(const std::vector<Vec3>& queries,
                                               const std::vector<Vec3>& points, int k) {
  std::vector<std::vector<int>> out(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    std::vector<std::pair<double, int>> all;
    for (std::size_t p = 0; p < points.size(); ++p)
      all.emplace_back(dist2(queries[q], points[p]), static_cast<int>(p));
    std::sort(all.begin(), all.end());
    for (int i = 0; i < k; ++i) out[q].push_back(all[static_cast<std::size_t>(i)].second);
  }
  return out;
}

inline std::vector<int> fps_brute(const std::vector<Vec3>& points, int n, int seed_index) {
  std::vector<int> picked = {seed_index};
  while (static_cast<int>(picked.size()) < n) {
    int best = -1;
    double best_d = -1;
    for (int p = 0; p < static_cast<int>(points.size()); ++p) {
      if (std::find(picked.begin(), picked.end(), p) != picked.end()) continue;
      double mind = std::numeric_limits<double>::infinity();
      for (int s : picked) mind = std::min(mind, dist2(points[static_cast<std::size_t>(p)], points[static_cast<std::size_t>(s)]));
      if (mind > best_d) {
        best_d = mind;
        best = p;
      }
    }
    picked.push_back(best);
  }
  return picked;
}

// Exhaustive minimum over all injective gt->query maps, enumerated in
// lexicographic order of query_for_gt with strict improvement, so the first
// optimum found is the lexicographically smallest.
struct BruteAssignment {
  std::vector<int> query_for_gt;
  double total = std::numeric_limits<double>::infinity();
};

inline void hungarian_brute_rec(const std::vector<std::vector<double>>& cost, std::size_t g,
                                std::vector<int>& cur, std::vector<char>& used, double acc,
                                BruteAssignment& best) {
  std::size_t n_gt = cost[0].size();
  if (g == n_gt) {
    if (acc < best.total) {
      best.total = acc;
      best.query_for_gt = cur;
    }
    return;
  }
  for (int q = 0; q < static_cast<int>(cost.size()); ++q) {
    if (used[static_cast<std::size_t>(q)]) continue;
    used[static_cast<std::size_t>(q)] = true;
    cur[g] = q;
    hungarian_brute_rec(cost, g + 1, cur, used, acc + cost[static_cast<std::size_t>(q)][g], best);
    used[static_cast<std::size_t>(q)] = false;
  }
}

inline BruteAssignment hungarian_brute(const std::vector<std::vector<double>>& cost) {
  BruteAssignment best;
  std::vector<int> cur(cost[0].size(), -1);
  std::vector<char> used(cost.size(), false);
  hungarian_brute_rec(cost, 0, cur, used, 0.0, best);
  return best;
}

// GIoU estimated by sampling uniformly inside the enclosing hull.
inline double giou_monte_carlo(const AABB3& a, const AABB3& b, int samples, Rng& rng) {
  AABB3 hull = enclosing_box(a, b);
  double vh = hull.volume();
  if (vh <= 0) return iou3(a, b);
  int in_a = 0, in_b = 0, in_both = 0;
  for (int s = 0; s < samples; ++s) {
    Vec3 p{rng.uniform(hull.mn.x, hull.mx.x), rng.uniform(hull.mn.y, hull.mx.y),
           rng.uniform(hull.mn.z, hull.mx.z)};
    bool ia = a.contains(p), ib = b.contains(p);
    in_a += ia;
    in_b += ib;
    in_both += ia && ib;
  }
  double vi = vh * in_both / samples;
  double vu = vh * (in_a + in_b - in_both) / samples;
  double iou = vu > 0 ? vi / vu : 0.0;
  return iou - (vh - vu) / vh;
}

// ---------------------------------------------------------------------------
// Suite runners shared by the `oracle` subcommand and the acceptance tests.

struct SuiteReport {
  std::string name;
  int trials = 0;
  int failures = 0;
  std::string detail;

  bool ok() const { return failures == 0; }
};

inline SuiteReport run_knn_suite(int trials, std::uint64_t seed) {
  SuiteReport rep{"knn", trials, 0, ""};
  Rng rng(mix_seed(seed, 1));
  for (int t = 0; t < trials; ++t) {
    int n = 2 + static_cast<int>(rng.uniform_int(999));
    std::vector<Vec3> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) p = {rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)};
    std::vector<Vec3> queries(4);
    for (auto& q : queries) q = {rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)};
    int k = 1 + static_cast<int>(rng.uniform_int(std::min(n, 16)));
    if (knn(queries, pts, k) != knn_brute(queries, pts, k)) {
      ++rep.failures;
      rep.detail = "mismatch at trial " + std::to_string(t);
    }
  }
  return rep;
}

inline SuiteReport run_fps_suite(int trials, std::uint64_t seed) {
  SuiteReport rep{"fps", trials, 0, ""};
  Rng rng(mix_seed(seed, 2));
  for (int t = 0; t < trials; ++t) {
    int n = 1 + static_cast<int>(rng.uniform_int(100));
    std::vector<Vec3> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) p = {rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)};
    int m = 1 + static_cast<int>(rng.uniform_int(n));
    int s = static_cast<int>(rng.uniform_int(n));
    if (fps(pts, m, s) != fps_brute(pts, m, s)) {
      ++rep.failures;
      rep.detail = "mismatch at trial " + std::to_string(t);
    }
  }
  return rep;
}

inline SuiteReport run_hungarian_suite(int trials, std::uint64_t seed) {
  SuiteReport rep{"hungarian", trials, 0, ""};
  Rng rng(mix_seed(seed, 3));
  for (int t = 0; t < trials; ++t) {
    int n_gt = 1 + static_cast<int>(rng.uniform_int(7));
    int m = n_gt + static_cast<int>(rng.uniform_int(static_cast<std::int64_t>(10 - n_gt)));
    std::vector<std::vector<double>> cost(static_cast<std::size_t>(m),
                                          std::vector<double>(static_cast<std::size_t>(n_gt)));
    for (auto& row : cost)
      for (auto& c : row) c = rng.uniform(-5, 5);
    Assignment fast = hungarian(cost);
    BruteAssignment slow = hungarian_brute(cost);
    double fast_total = assignment_cost(cost, fast);
    if (fast_total != slow.total || fast.query_for_gt != slow.query_for_gt) {
      ++rep.failures;
      std::ostringstream os;
      os << "trial " << t << ": fast total " << fast_total << " vs brute " << slow.total;
      rep.detail = os.str();
    }
  }
  return rep;
}

inline SuiteReport run_giou_suite(int trials, std::uint64_t seed) {
  SuiteReport rep{"giou", trials, 0, ""};
  Rng rng(mix_seed(seed, 4));
  // Exact fixtures first.
  AABB3 unit{{0, 0, 0}, {1, 1, 1}};
  AABB3 far{{2, 0, 0}, {3, 1, 1}};
  AABB3 half{{0.5, 0, 0}, {1.5, 1, 1}};
  if (std::abs(giou3(unit, unit) - 1.0) > 1e-12 ||
      std::abs(giou3(unit, far) + 1.0 / 3.0) > 1e-12 ||
      std::abs(iou3(unit, half) - 1.0 / 3.0) > 1e-12) {
    ++rep.failures;
    rep.detail = "fixture mismatch";
    return rep;
  }
  for (int t = 0; t < trials; ++t) {
    auto rand_box = [&]() {
      Vec3 a{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
      Vec3 b{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
      return AABB3{{std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)},
                   {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)}};
    };
    AABB3 a = rand_box(), b = rand_box();
    double mc = giou_monte_carlo(a, b, 200000, rng);
    if (std::abs(mc - giou3(a, b)) > 0.03) {
      ++rep.failures;
      rep.detail = "MC deviation at trial " + std::to_string(t);
    }
  }
  return rep;
}

}  // namespace vg3d::oracle
