#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace vg3d {

// Query-to-ground-truth assignment. Every gt is matched exactly once; queries
// appear at most once.
struct Assignment {
  std::vector<int> query_for_gt;   // size n_gt
  std::vector<int> unmatched;      // query indices left unmatched

  int gt_for_query(int q) const {
    for (std::size_t g = 0; g < query_for_gt.size(); ++g)
      if (query_for_gt[g] == q) return static_cast<int>(g);
    return -1;
  }
};

namespace detail {

// Jonker-Volgenant style shortest augmenting path solver on a square matrix.
// Returns row assignment col_for_row.
inline std::vector<int> solve_square(const std::vector<std::vector<double>>& cost) {
  int n = static_cast<int>(cost.size());
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0), v(static_cast<std::size_t>(n + 1), 0);
  std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), std::numeric_limits<double>::infinity());
    std::vector<char> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      int i0 = p[static_cast<std::size_t>(j0)], j1 = 0;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                     u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> col_for_row(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<std::size_t>(j)] > 0) col_for_row[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return col_for_row;
}

inline double assignment_total(const std::vector<std::vector<double>>& cost,
                               const std::vector<int>& query_for_gt) {
  double t = 0;
  for (std::size_t g = 0; g < query_for_gt.size(); ++g)
    t += cost[static_cast<std::size_t>(query_for_gt[g])][g];
  return t;
}

// Minimum total over assignments with gts [g..n) assigned to unused queries.
inline double min_completion(const std::vector<std::vector<double>>& cost, std::size_t g,
                             std::vector<char>& used, int m) {
  std::size_t n_gt = cost.empty() ? 0 : cost[0].size();
  if (g == n_gt) return 0;
  // Reduced square problem over the remaining queries and gts.
  std::vector<int> free_q;
  for (int q = 0; q < m; ++q)
    if (!used[static_cast<std::size_t>(q)]) free_q.push_back(q);
  std::size_t rem = n_gt - g;
  int side = static_cast<int>(free_q.size());
  std::vector<std::vector<double>> sq(static_cast<std::size_t>(side),
                                      std::vector<double>(static_cast<std::size_t>(side), 0));
  for (int i = 0; i < side; ++i)
    for (std::size_t j = 0; j < rem; ++j)
      sq[static_cast<std::size_t>(i)][j] = cost[static_cast<std::size_t>(free_q[static_cast<std::size_t>(i)])][g + j];
  auto rows = solve_square(sq);
  double total = 0;
  for (int i = 0; i < side; ++i) {
    int c = rows[static_cast<std::size_t>(i)];
    if (c >= 0 && static_cast<std::size_t>(c) < rem)
      total += cost[static_cast<std::size_t>(free_q[static_cast<std::size_t>(i)])][g + static_cast<std::size_t>(c)];
  }
  return total;
}

}  // namespace detail

// Minimum-cost assignment of every gt column to a distinct query row
// (n_gt <= M). Among minimal-cost assignments, returns the lexicographically
// smallest query_for_gt vector.
inline Assignment hungarian(const std::vector<std::vector<double>>& cost) {
  int m = static_cast<int>(cost.size());
  if (m == 0) throw std::runtime_error("hungarian: empty cost matrix");
  std::size_t n_gt = cost[0].size();
  if (n_gt == 0) throw std::runtime_error("hungarian: no ground-truth columns");
  if (static_cast<int>(n_gt) > m)
    throw std::runtime_error("hungarian: more ground truths than queries");
  double scale = 0;
  for (const auto& row : cost) {
    if (row.size() != n_gt) throw std::runtime_error("hungarian: ragged cost matrix");
    for (double c : row) {
      if (!std::isfinite(c)) throw std::runtime_error("hungarian: non-finite cost");
      scale = std::max(scale, std::abs(c));
    }
  }
  std::vector<char> used(static_cast<std::size_t>(m), false);
  double best_total = detail::min_completion(cost, 0, used, m);
  const double tol = 1e-12 * std::max(1.0, scale) * static_cast<double>(n_gt);

  // Fix gt columns in order to the smallest query index that still permits an
  // optimal completion; this pins the lexicographic tie-break.
  Assignment out;
  out.query_for_gt.assign(n_gt, -1);
  double committed = 0;
  for (std::size_t g = 0; g < n_gt; ++g) {
    for (int q = 0; q < m; ++q) {
      if (used[static_cast<std::size_t>(q)]) continue;
      used[static_cast<std::size_t>(q)] = true;
      double rest = detail::min_completion(cost, g + 1, used, m);
      double total = committed + cost[static_cast<std::size_t>(q)][g] + rest;
      if (total <= best_total + tol) {
        out.query_for_gt[g] = q;
        committed += cost[static_cast<std::size_t>(q)][g];
        break;
      }
      used[static_cast<std::size_t>(q)] = false;
    }
    if (out.query_for_gt[g] < 0) throw std::runtime_error("hungarian: internal search failure");
  }
  for (int q = 0; q < m; ++q)
    if (!used[static_cast<std::size_t>(q)]) out.unmatched.push_back(q);
  return out;
}

inline double assignment_cost(const std::vector<std::vector<double>>& cost, const Assignment& a) {
  return detail::assignment_total(cost, a.query_for_gt);
}

}  // namespace vg3d
