#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "vg3d/common.hpp"

namespace vg3d {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }
  Vec3 normalized() const {
    double n = norm();
    if (n == 0) throw std::runtime_error("Vec3: normalizing zero vector");
    return {x / n, y / n, z / n};
  }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline double dist2(const Vec3& a, const Vec3& b) { return (a - b).norm2(); }

struct CameraIntrinsics {
  double fx = 1, fy = 1, cx = 0, cy = 0;
};

// Row-major 3x3 rotation plus translation, mapping camera frame to world.
struct Pose {
  std::array<double, 9> rot{1, 0, 0, 0, 1, 0, 0, 0, 1};
  Vec3 t;

  Vec3 rotate(const Vec3& p) const {
    return {rot[0] * p.x + rot[1] * p.y + rot[2] * p.z,
            rot[3] * p.x + rot[4] * p.y + rot[5] * p.z,
            rot[6] * p.x + rot[7] * p.y + rot[8] * p.z};
  }
  Vec3 rotate_transposed(const Vec3& p) const {
    return {rot[0] * p.x + rot[3] * p.y + rot[6] * p.z,
            rot[1] * p.x + rot[4] * p.y + rot[7] * p.z,
            rot[2] * p.x + rot[5] * p.y + rot[8] * p.z};
  }
  Vec3 to_world(const Vec3& cam) const { return rotate(cam) + t; }
  Vec3 to_camera(const Vec3& world) const { return rotate_transposed(world - t); }
};

inline Pose compose_rotation(const std::array<double, 9>& a, const Pose& p) {
  Pose out = p;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += a[static_cast<std::size_t>(i * 3 + k)] * p.rot[static_cast<std::size_t>(k * 3 + j)];
      out.rot[static_cast<std::size_t>(i * 3 + j)] = s;
    }
  return out;
}

// Max deviation of R^T R from identity plus the determinant error.
inline double rotation_error(const std::array<double, 9>& r) {
  double err = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += r[static_cast<std::size_t>(k * 3 + i)] * r[static_cast<std::size_t>(k * 3 + j)];
      err = std::max(err, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  double det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
               r[2] * (r[3] * r[7] - r[4] * r[6]);
  return std::max(err, std::abs(det - 1.0));
}

// Depth in meters; 0 marks an invalid pixel. Stored as f32 to match the
// on-disk format exactly.
struct DepthMap {
  int height = 0, width = 0;
  std::vector<float> d;

  float at(int v, int u) const { return d[static_cast<std::size_t>(v) * width + u]; }
  float& at(int v, int u) { return d[static_cast<std::size_t>(v) * width + u]; }
};

struct PointMap {
  int height = 0, width = 0;
  std::vector<Vec3> xyz;
  std::vector<std::uint8_t> valid;

  const Vec3& at(int v, int u) const { return xyz[static_cast<std::size_t>(v) * width + u]; }
  bool is_valid(int v, int u) const { return valid[static_cast<std::size_t>(v) * width + u] != 0; }
};

struct AABB3 {
  Vec3 mn, mx;

  double volume() const {
    double vx = mx.x - mn.x, vy = mx.y - mn.y, vz = mx.z - mn.z;
    if (vx < 0 || vy < 0 || vz < 0) return 0;
    return vx * vy * vz;
  }
  bool contains(const Vec3& p) const {
    return p.x >= mn.x && p.x <= mx.x && p.y >= mn.y && p.y <= mx.y && p.z >= mn.z && p.z <= mx.z;
  }
};

// ---------------------------------------------------------------------------
// Pinhole camera.

inline PointMap unproject(const DepthMap& depth, const CameraIntrinsics& k, const Pose& pose) {
  PointMap pm;
  pm.height = depth.height;
  pm.width = depth.width;
  pm.xyz.assign(static_cast<std::size_t>(depth.height) * depth.width, Vec3{});
  pm.valid.assign(pm.xyz.size(), 0);
  for (int v = 0; v < depth.height; ++v)
    for (int u = 0; u < depth.width; ++u) {
      double d = depth.at(v, u);
      if (d <= 0) continue;
      Vec3 cam{(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d};
      std::size_t i = static_cast<std::size_t>(v) * depth.width + u;
      pm.xyz[i] = pose.to_world(cam);
      pm.valid[i] = 1;
    }
  return pm;
}

struct PixelCoord {
  double u, v, d;
};

inline PixelCoord project(const Vec3& world, const CameraIntrinsics& k, const Pose& pose) {
  Vec3 cam = pose.to_camera(world);
  if (cam.z <= 0) throw std::runtime_error("project: point behind or at camera plane");
  return {k.cx + k.fx * cam.x / cam.z, k.cy + k.fy * cam.y / cam.z, cam.z};
}

// ---------------------------------------------------------------------------
// Neighbor search and sampling.

// k nearest points per query by Euclidean distance, ascending, ties by
// smaller index. A query that coincides with a stored point includes it.
inline std::vector<std::vector<int>> knn(const std::vector<Vec3>& queries,
                                         const std::vector<Vec3>& points, int k) {
  if (points.empty()) throw std::runtime_error("knn: empty point set");
  if (k <= 0 || k > static_cast<int>(points.size()))
    throw std::runtime_error("knn: k out of range");
  std::vector<std::vector<int>> out(queries.size());
  std::vector<std::pair<double, int>> cand(points.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t p = 0; p < points.size(); ++p)
      cand[p] = {dist2(queries[q], points[p]), static_cast<int>(p)};
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    out[q].resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out[q][static_cast<std::size_t>(i)] = cand[static_cast<std::size_t>(i)].second;
  }
  return out;
}

// Greedy farthest-point sampling: first pick is seed_index, each next pick
// maximizes the minimum distance to the selected set, ties by smaller index.
inline std::vector<int> fps(const std::vector<Vec3>& points, int n, int seed_index) {
  int total = static_cast<int>(points.size());
  if (n < 1 || n > total) throw std::runtime_error("fps: n out of range");
  if (seed_index < 0 || seed_index >= total) throw std::runtime_error("fps: bad seed index");
  std::vector<int> picked;
  picked.reserve(static_cast<std::size_t>(n));
  std::vector<double> min_d2(static_cast<std::size_t>(total), std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> used(static_cast<std::size_t>(total), 0);
  int cur = seed_index;
  picked.push_back(cur);
  used[static_cast<std::size_t>(cur)] = 1;
  for (int it = 1; it < n; ++it) {
    for (int p = 0; p < total; ++p) {
      if (used[static_cast<std::size_t>(p)]) continue;
      min_d2[static_cast<std::size_t>(p)] =
          std::min(min_d2[static_cast<std::size_t>(p)], dist2(points[static_cast<std::size_t>(p)], points[static_cast<std::size_t>(cur)]));
    }
    int best = -1;
    double best_d = -1;
    for (int p = 0; p < total; ++p) {
      if (used[static_cast<std::size_t>(p)]) continue;
      if (min_d2[static_cast<std::size_t>(p)] > best_d) {
        best_d = min_d2[static_cast<std::size_t>(p)];
        best = p;
      }
    }
    cur = best;
    picked.push_back(cur);
    used[static_cast<std::size_t>(cur)] = 1;
  }
  return picked;
}

// ---------------------------------------------------------------------------
// Boxes.

template <class MaskVec>
inline AABB3 mask_to_aabb(const MaskVec& mask, const std::vector<Vec3>& coords) {
  if (mask.size() != coords.size()) throw std::runtime_error("mask_to_aabb: size mismatch");
  AABB3 box{{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             std::numeric_limits<double>::infinity()},
            {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity()}};
  bool any = false;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    any = true;
    const Vec3& p = coords[i];
    box.mn.x = std::min(box.mn.x, p.x);
    box.mn.y = std::min(box.mn.y, p.y);
    box.mn.z = std::min(box.mn.z, p.z);
    box.mx.x = std::max(box.mx.x, p.x);
    box.mx.y = std::max(box.mx.y, p.y);
    box.mx.z = std::max(box.mx.z, p.z);
  }
  if (!any) throw std::runtime_error("mask_to_aabb: empty mask");
  return box;
}

inline double intersection_volume(const AABB3& a, const AABB3& b) {
  double vx = std::min(a.mx.x, b.mx.x) - std::max(a.mn.x, b.mn.x);
  double vy = std::min(a.mx.y, b.mx.y) - std::max(a.mn.y, b.mn.y);
  double vz = std::min(a.mx.z, b.mx.z) - std::max(a.mn.z, b.mn.z);
  if (vx <= 0 || vy <= 0 || vz <= 0) return 0;
  return vx * vy * vz;
}

inline AABB3 enclosing_box(const AABB3& a, const AABB3& b) {
  return {{std::min(a.mn.x, b.mn.x), std::min(a.mn.y, b.mn.y), std::min(a.mn.z, b.mn.z)},
          {std::max(a.mx.x, b.mx.x), std::max(a.mx.y, b.mx.y), std::max(a.mx.z, b.mx.z)}};
}

// Degenerate zero-volume unions give IoU 0.
inline double iou3(const AABB3& a, const AABB3& b) {
  double vi = intersection_volume(a, b);
  double vu = a.volume() + b.volume() - vi;
  if (vu <= 0) return 0;
  return vi / vu;
}

// iou − (hull − union)/hull; a zero-volume hull falls back to plain IoU.
inline double giou3(const AABB3& a, const AABB3& b) {
  double vi = intersection_volume(a, b);
  double vu = a.volume() + b.volume() - vi;
  double iou = vu > 0 ? vi / vu : 0.0;
  double vh = enclosing_box(a, b).volume();
  if (vh <= 0) return iou;
  return iou - (vh - vu) / vh;
}

// ---------------------------------------------------------------------------
// Sensor noise models.

// Gaussian translation noise per axis plus a rotation about a uniformly random
// axis by a Gaussian angle; the rotation is re-orthonormalized. Zero sigmas
// return the pose unchanged.
inline Pose perturb_pose(const Pose& pose, double sigma_t, double sigma_r, Rng& rng) {
  if (sigma_t < 0 || sigma_r < 0) throw std::runtime_error("perturb_pose: negative sigma");
  if (sigma_t == 0 && sigma_r == 0) return pose;
  Pose out = pose;
  out.t.x += rng.normal(0, sigma_t);
  out.t.y += rng.normal(0, sigma_t);
  out.t.z += rng.normal(0, sigma_t);
  // Uniform random axis via normalized gaussian vector.
  Vec3 axis;
  do {
    axis = {rng.normal(), rng.normal(), rng.normal()};
  } while (axis.norm2() < 1e-12);
  axis = axis.normalized();
  double angle = rng.normal(0, sigma_r);
  double c = std::cos(angle), s = std::sin(angle), oc = 1 - c;
  std::array<double, 9> noise{c + axis.x * axis.x * oc,        axis.x * axis.y * oc - axis.z * s,
                              axis.x * axis.z * oc + axis.y * s, axis.y * axis.x * oc + axis.z * s,
                              c + axis.y * axis.y * oc,        axis.y * axis.z * oc - axis.x * s,
                              axis.z * axis.x * oc - axis.y * s, axis.z * axis.y * oc + axis.x * s,
                              c + axis.z * axis.z * oc};
  out = compose_rotation(noise, out);
  // Gram-Schmidt re-orthonormalization of the rows.
  Vec3 r0{out.rot[0], out.rot[1], out.rot[2]};
  Vec3 r1{out.rot[3], out.rot[4], out.rot[5]};
  r0 = r0.normalized();
  r1 = (r1 - r0 * r1.dot(r0)).normalized();
  Vec3 r2 = r0.cross(r1);
  out.rot = {r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z};
  return out;
}

// Adds N(0, sigma_d^2) to every valid pixel, clamped at 0; invalid pixels are
// untouched. Zero sigma returns the map unchanged.
inline DepthMap perturb_depth(const DepthMap& depth, double sigma_d, Rng& rng) {
  if (sigma_d < 0) throw std::runtime_error("perturb_depth: negative sigma");
  if (sigma_d == 0) return depth;
  DepthMap out = depth;
  for (auto& d : out.d) {
    if (d <= 0) continue;
    double nd = static_cast<double>(d) + rng.normal(0, sigma_d);
    d = static_cast<float>(std::max(0.0, nd));
  }
  return out;
}

}  // namespace vg3d
