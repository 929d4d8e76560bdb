#pragma once

// Procedural posed RGB-D scenes: floor-resting cuboids in a rectangular room,
// a camera ring, ray-cast depth/instance/channel renders, and programmatic
// referring expressions with token-level span labels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "vg3d/common.hpp"
#include "vg3d/geometry.hpp"

namespace vg3d {

inline const std::vector<std::string>& color_palette() {
  static const std::vector<std::string> palette = {"red",    "green", "blue", "yellow",
                                                   "purple", "orange", "cyan", "brown"};
  return palette;
}

// Channels: one-hot over the 8 palette colors plus a background flag.
inline constexpr int kNumColors = 8;
inline constexpr int kNumChannels = kNumColors + 1;
inline constexpr int kBackgroundChannel = kNumColors;

struct SceneObject {
  int id = 0;  // 1-based; 0 is background/floor in instance maps
  std::string shape_class = "cuboid";
  int color = 0;
  std::string color_name;
  Vec3 center;
  Vec3 half_extents;

  AABB3 bounds() const { return {center - half_extents, center + half_extents}; }
};

struct CameraView {
  CameraIntrinsics intrinsics;
  Pose pose;
};

enum class SpanLabel : int { kNone = 0, kTarget = 1, kAnchor = 2 };

struct Utterance {
  std::string text;
  std::vector<std::string> tokens;
  int target_object_id = 0;
  std::vector<int> anchor_object_ids;
  std::vector<int> span_labels;  // SpanLabel per token
};

struct Scene {
  AABB3 room;
  std::vector<SceneObject> objects;
  std::vector<CameraView> cameras;
  std::uint64_t seed = 0;
  std::vector<Utterance> utterances;

  const SceneObject& object_by_id(int id) const {
    for (const auto& o : objects)
      if (o.id == id) return o;
    throw std::runtime_error("scene: unknown object id " + std::to_string(id));
  }
};

struct RenderedView {
  DepthMap depth;
  std::vector<std::uint16_t> instance;  // 0 = background/floor
  std::vector<float> channels;          // H*W*kNumChannels
  int height = 0, width = 0;

  std::uint16_t instance_at(int v, int u) const {
    return instance[static_cast<std::size_t>(v) * width + u];
  }
};

struct SceneData {
  Scene scene;
  std::vector<RenderedView> views;
};

struct SceneGenConfig {
  int n_objects = 5;
  double room_xy = 5.0;
  double room_h = 2.5;
  bool distractors = true;
  int n_cameras = 12;
  int height = 48;
  int width = 64;
  double fov_deg = 70.0;
  double obj_half_min = 0.25;
  double obj_half_max = 0.5;
  int min_visible_pixels = 8;
};

// ---------------------------------------------------------------------------
// Rendering.

namespace detail {

// Slab test; returns entry distance in units of the (unnormalized) direction
// or infinity on miss. Rays starting inside the box count as misses.
inline double ray_aabb(const Vec3& origin, const Vec3& dir, const AABB3& box) {
  double tn = 0, tf = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    double o = origin[axis], d = dir[axis];
    double mn = box.mn[axis], mx = box.mx[axis];
    if (std::abs(d) < 1e-12) {
      if (o < mn || o > mx) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (mn - o) / d, t1 = (mx - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    tn = std::max(tn, t0);
    tf = std::min(tf, t1);
    if (tn > tf) return std::numeric_limits<double>::infinity();
  }
  return tn > 1e-9 ? tn : std::numeric_limits<double>::infinity();
}

}  // namespace detail

inline RenderedView render_view(const Scene& scene, const CameraIntrinsics& k, const Pose& pose,
                                int height, int width) {
  RenderedView out;
  out.height = height;
  out.width = width;
  out.depth.height = height;
  out.depth.width = width;
  out.depth.d.assign(static_cast<std::size_t>(height) * width, 0.f);
  out.instance.assign(static_cast<std::size_t>(height) * width, 0);
  out.channels.assign(static_cast<std::size_t>(height) * width * kNumChannels, 0.f);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) {
      Vec3 dir_cam{(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
      Vec3 dir = pose.rotate(dir_cam);
      double best_t = std::numeric_limits<double>::infinity();
      int best_obj = -1;  // -1 none, 0 floor, >0 object id
      // Floor plane z=0 bounded to the room footprint.
      if (dir.z < -1e-12) {
        double t = -pose.t.z / dir.z;
        if (t > 1e-9) {
          Vec3 p = pose.t + dir * t;
          if (p.x >= scene.room.mn.x && p.x <= scene.room.mx.x && p.y >= scene.room.mn.y &&
              p.y <= scene.room.mx.y) {
            best_t = t;
            best_obj = 0;
          }
        }
      }
      for (const auto& obj : scene.objects) {
        double t = detail::ray_aabb(pose.t, dir, obj.bounds());
        if (t < best_t) {
          best_t = t;
          best_obj = obj.id;
        }
      }
      if (best_obj < 0) continue;
      std::size_t i = static_cast<std::size_t>(v) * width + u;
      out.depth.d[i] = static_cast<float>(best_t);  // camera-z depth: dir_cam.z == 1
      out.instance[i] = static_cast<std::uint16_t>(best_obj);
      std::size_t base = i * kNumChannels;
      if (best_obj == 0) {
        out.channels[base + kBackgroundChannel] = 1.f;
      } else {
        out.channels[base + static_cast<std::size_t>(scene.object_by_id(best_obj).color)] = 1.f;
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// Scene generation.

namespace detail {

inline Pose look_at(const Vec3& eye, const Vec3& target) {
  Vec3 z = (target - eye).normalized();
  Vec3 up{0, 0, 1};
  Vec3 x = z.cross(up);
  if (x.norm2() < 1e-12) throw std::runtime_error("look_at: view direction parallel to up");
  x = x.normalized();
  Vec3 y = z.cross(x);
  Pose p;
  p.rot = {x.x, y.x, z.x, x.y, y.y, z.y, x.z, y.z, z.z};
  p.t = eye;
  return p;
}

inline bool boxes_overlap_xy(const AABB3& a, const AABB3& b, double margin) {
  return a.mn.x - margin < b.mx.x && b.mn.x - margin < a.mx.x && a.mn.y - margin < b.mx.y &&
         b.mn.y - margin < a.mx.y;
}

inline bool try_place_objects(const SceneGenConfig& cfg, Rng& rng, std::vector<SceneObject>& out,
                              int* attempts_left) {
  out.clear();
  double place_half = 0.35 * cfg.room_xy;
  for (int i = 0; i < cfg.n_objects; ++i) {
    bool placed = false;
    while (*attempts_left > 0) {
      --*attempts_left;
      SceneObject obj;
      obj.id = i + 1;
      obj.color = static_cast<int>(rng.uniform_int(kNumColors));
      obj.color_name = color_palette()[static_cast<std::size_t>(obj.color)];
      obj.half_extents = {rng.uniform(cfg.obj_half_min, cfg.obj_half_max),
                          rng.uniform(cfg.obj_half_min, cfg.obj_half_max),
                          rng.uniform(cfg.obj_half_min, cfg.obj_half_max)};
      obj.center = {rng.uniform(-place_half, place_half), rng.uniform(-place_half, place_half),
                    obj.half_extents.z};
      bool ok = true;
      for (const auto& other : out)
        if (boxes_overlap_xy(obj.bounds(), other.bounds(), 0.05)) ok = false;
      if (!ok) continue;
      out.push_back(obj);
      placed = true;
      break;
    }
    if (!placed) return false;
  }
  if (cfg.distractors && cfg.n_objects >= 2) {
    bool has_pair = false;
    for (std::size_t i = 0; i < out.size() && !has_pair; ++i)
      for (std::size_t j = i + 1; j < out.size(); ++j)
        if (out[i].color == out[j].color) {
          has_pair = true;
          break;
        }
    if (!has_pair) {
      out[1].color = out[0].color;
      out[1].color_name = out[0].color_name;
    }
  }
  return true;
}

}  // namespace detail

// Deterministic in (config, seed). Guarantees non-overlapping floor-resting
// cuboids, a duplicated (class, color) pair when distractors are on, and a
// camera ring from which every object is visible in at least one view.
inline Scene generate_scene(const SceneGenConfig& cfg, std::uint64_t seed) {
  if (cfg.n_objects < 1) throw ValidationError("generate_scene: n_objects must be >= 1");
  if (cfg.n_cameras < 8) throw ValidationError("generate_scene: camera ring needs >= 8 views");
  double place_area = (0.7 * cfg.room_xy) * (0.7 * cfg.room_xy);
  double max_footprint = (2 * cfg.obj_half_max + 0.05) * (2 * cfg.obj_half_max + 0.05);
  if (cfg.n_objects * max_footprint > 0.7 * place_area)
    throw ValidationError("generate_scene: room too small for requested object count");

  for (int attempt = 0; attempt < 50; ++attempt) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    Scene scene;
    scene.seed = seed;
    scene.room = {{-cfg.room_xy / 2, -cfg.room_xy / 2, 0},
                  {cfg.room_xy / 2, cfg.room_xy / 2, cfg.room_h}};
    int placement_attempts = 1000;
    if (!detail::try_place_objects(cfg, rng, scene.objects, &placement_attempts))
      throw std::runtime_error("generate_scene: placement failure after 1000 rejection attempts");

    double fx = 0.5 * cfg.width / std::tan(0.5 * cfg.fov_deg * kPi / 180.0);
    CameraIntrinsics k{fx, fx, (cfg.width - 1) / 2.0, (cfg.height - 1) / 2.0};
    double ring_r = 0.46 * cfg.room_xy;
    double cam_h = 0.8 * cfg.room_h;
    Vec3 target{0, 0, 0.3};
    for (int c = 0; c < cfg.n_cameras; ++c) {
      double ang = 2.0 * kPi * c / cfg.n_cameras;
      Vec3 eye{ring_r * std::cos(ang), ring_r * std::sin(ang), cam_h};
      scene.cameras.push_back({k, detail::look_at(eye, target)});
    }

    // Visibility check: every object needs min_visible_pixels in some view.
    std::vector<int> best_pixels(scene.objects.size(), 0);
    for (const auto& cam : scene.cameras) {
      RenderedView rv = render_view(scene, cam.intrinsics, cam.pose, cfg.height, cfg.width);
      std::vector<int> count(scene.objects.size() + 1, 0);
      for (auto inst : rv.instance) ++count[inst];
      for (std::size_t i = 0; i < scene.objects.size(); ++i)
        best_pixels[i] = std::max(best_pixels[i], count[static_cast<std::size_t>(scene.objects[i].id)]);
    }
    bool all_visible = true;
    for (int bp : best_pixels)
      if (bp < cfg.min_visible_pixels) all_visible = false;
    if (all_visible) return scene;
  }
  throw std::runtime_error("generate_scene: no visible layout found after 50 scene attempts");
}

// ---------------------------------------------------------------------------
// Referring expressions.

enum class RelationKind { kSimple, kClosest, kFarthest, kLeftOf, kRightOf };

struct UtteranceCandidate {
  int target_id = 0;
  int anchor_id = 0;  // 0 when simple
  RelationKind kind = RelationKind::kSimple;
};

namespace detail {

// Objects satisfying "the {color} cuboid [relation to anchor]" with relations
// evaluated in the fixed world frame (left = -x).
inline std::vector<int> satisfying_objects(const Scene& scene, int color, RelationKind kind,
                                           int anchor_id) {
  std::vector<const SceneObject*> with_color;
  for (const auto& o : scene.objects)
    if (o.color == color && o.id != anchor_id) with_color.push_back(&o);
  std::vector<int> result;
  switch (kind) {
    case RelationKind::kSimple: {
      for (auto* o : with_color) result.push_back(o->id);
      break;
    }
    case RelationKind::kClosest:
    case RelationKind::kFarthest: {
      const SceneObject& anchor = scene.object_by_id(anchor_id);
      const SceneObject* best = nullptr;
      double best_d = kind == RelationKind::kClosest ? std::numeric_limits<double>::infinity()
                                                     : -std::numeric_limits<double>::infinity();
      bool tie = false;
      for (auto* o : with_color) {
        double d = (o->center - anchor.center).norm();
        bool better = kind == RelationKind::kClosest ? d < best_d - 1e-9 : d > best_d + 1e-9;
        bool near_tie = std::abs(d - best_d) <= 1e-9;
        if (better) {
          best = o;
          best_d = d;
          tie = false;
        } else if (near_tie) {
          tie = true;
        }
      }
      if (best && !tie) result.push_back(best->id);
      break;
    }
    case RelationKind::kLeftOf:
    case RelationKind::kRightOf: {
      const SceneObject& anchor = scene.object_by_id(anchor_id);
      for (auto* o : with_color) {
        bool side = kind == RelationKind::kLeftOf ? o->center.x < anchor.center.x - 1e-9
                                                  : o->center.x > anchor.center.x + 1e-9;
        if (side) result.push_back(o->id);
      }
      break;
    }
  }
  return result;
}

inline bool anchor_color_unique(const Scene& scene, int anchor_id) {
  const SceneObject& anchor = scene.object_by_id(anchor_id);
  int count = 0;
  for (const auto& o : scene.objects)
    if (o.color == anchor.color) ++count;
  return count == 1;
}

}  // namespace detail

inline std::vector<UtteranceCandidate> enumerate_utterance_candidates(const Scene& scene) {
  std::vector<UtteranceCandidate> cands;
  for (const auto& target : scene.objects) {
    auto simple = detail::satisfying_objects(scene, target.color, RelationKind::kSimple, 0);
    if (simple.size() == 1 && simple[0] == target.id)
      cands.push_back({target.id, 0, RelationKind::kSimple});
    for (const auto& anchor : scene.objects) {
      if (anchor.id == target.id || anchor.color == target.color) continue;
      if (!detail::anchor_color_unique(scene, anchor.id)) continue;
      for (RelationKind kind : {RelationKind::kClosest, RelationKind::kFarthest,
                                RelationKind::kLeftOf, RelationKind::kRightOf}) {
        auto sat = detail::satisfying_objects(scene, target.color, kind, anchor.id);
        if (sat.size() == 1 && sat[0] == target.id) cands.push_back({target.id, anchor.id, kind});
      }
    }
  }
  return cands;
}

inline Utterance realize_utterance(const Scene& scene, const UtteranceCandidate& cand) {
  const SceneObject& target = scene.object_by_id(cand.target_id);
  Utterance utt;
  utt.target_object_id = cand.target_id;
  std::vector<std::string>& tok = utt.tokens;
  tok = {"the", target.color_name, target.shape_class};
  std::vector<int> target_span = {0, 1, 2};
  std::vector<int> anchor_span;
  if (cand.kind != RelationKind::kSimple) {
    const SceneObject& anchor = scene.object_by_id(cand.anchor_id);
    utt.anchor_object_ids.push_back(cand.anchor_id);
    switch (cand.kind) {
      case RelationKind::kClosest:
        tok.insert(tok.end(), {"closest", "to"});
        break;
      case RelationKind::kFarthest:
        tok.insert(tok.end(), {"farthest", "from"});
        break;
      case RelationKind::kLeftOf:
        tok.insert(tok.end(), {"to", "the", "left", "of"});
        break;
      case RelationKind::kRightOf:
        tok.insert(tok.end(), {"to", "the", "right", "of"});
        break;
      default:
        break;
    }
    int base = static_cast<int>(tok.size());
    tok.insert(tok.end(), {"the", anchor.color_name, anchor.shape_class});
    anchor_span = {base, base + 1, base + 2};
  }
  utt.span_labels.assign(tok.size(), static_cast<int>(SpanLabel::kNone));
  for (int i : target_span) utt.span_labels[static_cast<std::size_t>(i)] = static_cast<int>(SpanLabel::kTarget);
  for (int i : anchor_span) utt.span_labels[static_cast<std::size_t>(i)] = static_cast<int>(SpanLabel::kAnchor);
  for (std::size_t i = 0; i < tok.size(); ++i) {
    if (i) utt.text += ' ';
    utt.text += tok[i];
  }
  return utt;
}

// Re-derives the relation from the stored tokens and checks that exactly the
// recorded target satisfies it. Used both at generation and after loading.
inline bool verify_utterance(const Scene& scene, const Utterance& utt) {
  const auto& palette = color_palette();
  auto color_index = [&](const std::string& w) {
    for (int i = 0; i < kNumColors; ++i)
      if (palette[static_cast<std::size_t>(i)] == w) return i;
    return -1;
  };
  if (utt.tokens.size() < 3) return false;
  int target_color = color_index(utt.tokens[1]);
  if (target_color < 0) return false;
  RelationKind kind;
  int anchor_id = 0;
  if (utt.tokens.size() == 3) {
    kind = RelationKind::kSimple;
  } else {
    if (utt.anchor_object_ids.size() != 1) return false;
    anchor_id = utt.anchor_object_ids[0];
    const std::string& marker = utt.tokens[3];
    if (marker == "closest") kind = RelationKind::kClosest;
    else if (marker == "farthest") kind = RelationKind::kFarthest;
    else if (marker == "to" && utt.tokens.size() >= 6 && utt.tokens[5] == "left") kind = RelationKind::kLeftOf;
    else if (marker == "to" && utt.tokens.size() >= 6 && utt.tokens[5] == "right") kind = RelationKind::kRightOf;
    else return false;
    int anchor_color = color_index(utt.tokens[utt.tokens.size() - 2]);
    if (anchor_color < 0 || scene.object_by_id(anchor_id).color != anchor_color) return false;
    if (!detail::anchor_color_unique(scene, anchor_id)) return false;
  }
  auto sat = detail::satisfying_objects(scene, target_color, kind, anchor_id);
  return sat.size() == 1 && sat[0] == utt.target_object_id;
}

// Emits an utterance with a unique referent, verified exhaustively. Simple
// color-only templates are favored 3:1 over relational ones when available.
inline Utterance generate_utterance(const Scene& scene, Rng& rng) {
  auto cands = enumerate_utterance_candidates(scene);
  if (cands.empty())
    throw std::runtime_error("generate_utterance: no disambiguating template exists");
  std::vector<double> weight(cands.size());
  double total = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    weight[i] = cands[i].kind == RelationKind::kSimple ? 3.0 : 1.0;
    total += weight[i];
  }
  double pick = rng.uniform(0, total);
  std::size_t chosen = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (pick < weight[i]) {
      chosen = i;
      break;
    }
    pick -= weight[i];
  }
  Utterance utt = realize_utterance(scene, cands[chosen]);
  if (!verify_utterance(scene, utt))
    throw std::runtime_error("generate_utterance: verification failed");
  return utt;
}

// ---------------------------------------------------------------------------
// Deterministic text embeddings and frame sampling.

// Unit-norm embedding per token via a seeded hash of the token string.
inline std::vector<std::vector<double>> embed_text(const std::vector<std::string>& tokens,
                                                   int d_text, std::uint64_t seed) {
  if (tokens.empty()) throw std::runtime_error("embed_text: empty token list");
  std::vector<std::vector<double>> out(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    Rng rng(mix_seed(seed, fnv1a64(tokens[i])));
    std::vector<double> v(static_cast<std::size_t>(d_text));
    double norm2 = 0;
    for (auto& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (auto& x : v) x *= inv;
    out[i] = std::move(v);
  }
  return out;
}

// Mean of a view's rendered feature channels; deterministic stand-in for an
// image-level embedding.
inline std::vector<double> frame_embedding(const RenderedView& view) {
  std::vector<double> mean(kNumChannels, 0.0);
  std::size_t pixels = static_cast<std::size_t>(view.height) * view.width;
  for (std::size_t i = 0; i < pixels; ++i)
    for (int c = 0; c < kNumChannels; ++c)
      mean[static_cast<std::size_t>(c)] += view.channels[i * kNumChannels + static_cast<std::size_t>(c)];
  for (auto& m : mean) m /= static_cast<double>(pixels);
  return mean;
}

// Channel-space query for an utterance: indicator over the colors it mentions.
inline std::vector<double> utterance_channel_query(const Utterance& utt) {
  std::vector<double> q(kNumChannels, 0.0);
  const auto& palette = color_palette();
  for (const auto& tok : utt.tokens)
    for (int c = 0; c < kNumColors; ++c)
      if (palette[static_cast<std::size_t>(c)] == tok) q[static_cast<std::size_t>(c)] += 1.0;
  return q;
}

namespace detail {

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0;
  return dot / std::sqrt(na * nb);
}

inline double emb_dist2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace detail

// Top n_sim views by cosine similarity to the text embedding (ties by index),
// then n_fps more by farthest-point sampling in embedding space, continuing
// the max-min rule from the already-selected set. Returns all views when the
// budget covers them.
inline std::vector<int> frame_sample(const std::vector<std::vector<double>>& frame_embeddings,
                                     const std::vector<double>& text_embedding, int n_sim,
                                     int n_fps) {
  if (n_sim < 0 || n_fps < 0) throw std::runtime_error("frame_sample: negative budget");
  int n = static_cast<int>(frame_embeddings.size());
  if (n <= n_sim + n_fps) {
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::vector<double> sim(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    sim[static_cast<std::size_t>(i)] = detail::cosine(frame_embeddings[static_cast<std::size_t>(i)], text_embedding);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return sim[static_cast<std::size_t>(a)] > sim[static_cast<std::size_t>(b)];
  });
  std::vector<int> selected(order.begin(), order.begin() + n_sim);
  std::vector<std::uint8_t> used(static_cast<std::size_t>(n), 0);
  for (int s : selected) used[static_cast<std::size_t>(s)] = 1;
  std::vector<double> min_d(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i) {
    if (used[static_cast<std::size_t>(i)]) continue;
    for (int s : selected)
      min_d[static_cast<std::size_t>(i)] = std::min(
          min_d[static_cast<std::size_t>(i)],
          detail::emb_dist2(frame_embeddings[static_cast<std::size_t>(i)], frame_embeddings[static_cast<std::size_t>(s)]));
  }
  for (int pick = 0; pick < n_fps; ++pick) {
    int best = -1;
    double best_d = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      double d = selected.empty() ? (best == -1 ? 1.0 : 0.0) : min_d[static_cast<std::size_t>(i)];
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    if (best < 0) break;
    used[static_cast<std::size_t>(best)] = 1;
    selected.push_back(best);
    for (int i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      min_d[static_cast<std::size_t>(i)] = std::min(
          min_d[static_cast<std::size_t>(i)],
          detail::emb_dist2(frame_embeddings[static_cast<std::size_t>(i)], frame_embeddings[static_cast<std::size_t>(best)]));
    }
  }
  return selected;
}

}  // namespace vg3d
