#pragma once

// On-disk scene layout: meta.json manifest plus per-view little-endian
// row-major binaries (f32 depth, u16 instance ids, f32 feature channels).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vg3d/scene.hpp"
#include <json.hpp>

namespace vg3d {

inline constexpr int kSceneFormatVersion = 1;

namespace detail {

template <class T>
void write_blob(const std::filesystem::path& path, const std::vector<T>& data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("scene_io: cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(T)));
}

template <class T>
std::vector<T> read_blob(const std::filesystem::path& path, std::size_t count) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("scene_io: missing blob " + path.string());
  f.seekg(0, std::ios::end);
  std::size_t bytes = static_cast<std::size_t>(f.tellg());
  if (bytes != count * sizeof(T))
    throw std::runtime_error("scene_io: corrupt blob " + path.string() + " (expected " +
                             std::to_string(count * sizeof(T)) + " bytes, found " +
                             std::to_string(bytes) + ")");
  std::vector<T> data(count);
  f.seekg(0);
  f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
  if (!f) throw std::runtime_error("scene_io: short read on " + path.string());
  return data;
}

inline nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace detail

inline void save_scene(const SceneData& data, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json meta;
  meta["format"] = "vg3d-scene";
  meta["version"] = kSceneFormatVersion;
  meta["seed"] = data.scene.seed;
  meta["room"] = {{"min", detail::vec3_json(data.scene.room.mn)},
                  {"max", detail::vec3_json(data.scene.room.mx)}};
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : data.scene.objects) {
    objs.push_back({{"id", o.id},
                    {"shape_class", o.shape_class},
                    {"color", o.color},
                    {"color_name", o.color_name},
                    {"center", detail::vec3_json(o.center)},
                    {"half_extents", detail::vec3_json(o.half_extents)}});
  }
  meta["objects"] = objs;
  nlohmann::json cams = nlohmann::json::array();
  for (const auto& c : data.scene.cameras) {
    cams.push_back({{"fx", c.intrinsics.fx},
                    {"fy", c.intrinsics.fy},
                    {"cx", c.intrinsics.cx},
                    {"cy", c.intrinsics.cy},
                    {"rot", c.pose.rot},
                    {"t", detail::vec3_json(c.pose.t)}});
  }
  meta["cameras"] = cams;
  nlohmann::json utts = nlohmann::json::array();
  for (const auto& u : data.scene.utterances) {
    utts.push_back({{"text", u.text},
                    {"tokens", u.tokens},
                    {"target", u.target_object_id},
                    {"anchors", u.anchor_object_ids},
                    {"spans", u.span_labels}});
  }
  meta["utterances"] = utts;
  nlohmann::json views = nlohmann::json::array();
  for (std::size_t i = 0; i < data.views.size(); ++i) {
    const RenderedView& rv = data.views[i];
    char name[32];
    std::snprintf(name, sizeof(name), "view_%03zu", i);
    std::string stem(name);
    views.push_back({{"h", rv.height},
                     {"w", rv.width},
                     {"channels", kNumChannels},
                     {"depth", stem + ".depth.bin"},
                     {"instance", stem + ".inst.bin"},
                     {"features", stem + ".feat.bin"}});
    detail::write_blob(dir / (stem + ".depth.bin"), rv.depth.d);
    detail::write_blob(dir / (stem + ".inst.bin"), rv.instance);
    detail::write_blob(dir / (stem + ".feat.bin"), rv.channels);
  }
  meta["views"] = views;
  std::ofstream mf(dir / "meta.json", std::ios::trunc);
  if (!mf) throw std::runtime_error("scene_io: cannot write meta.json in " + dir.string());
  mf << meta.dump(2) << "\n";
}

inline SceneData load_scene(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(dir / "meta.json");
  if (!mf) throw std::runtime_error("scene_io: missing meta.json in " + dir.string());
  nlohmann::json meta;
  try {
    mf >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("scene_io: malformed meta.json: ") + e.what());
  }
  if (meta.value("format", "") != "vg3d-scene")
    throw std::runtime_error("scene_io: unrecognized format field");
  if (meta.value("version", -1) != kSceneFormatVersion)
    throw std::runtime_error("scene_io: unsupported scene format version " +
                             std::to_string(meta.value("version", -1)));
  SceneData data;
  Scene& s = data.scene;
  s.seed = meta.at("seed").get<std::uint64_t>();
  s.room.mn = detail::vec3_from(meta.at("room").at("min"));
  s.room.mx = detail::vec3_from(meta.at("room").at("max"));
  for (const auto& j : meta.at("objects")) {
    SceneObject o;
    o.id = j.at("id").get<int>();
    o.shape_class = j.at("shape_class").get<std::string>();
    o.color = j.at("color").get<int>();
    o.color_name = j.at("color_name").get<std::string>();
    o.center = detail::vec3_from(j.at("center"));
    o.half_extents = detail::vec3_from(j.at("half_extents"));
    s.objects.push_back(o);
  }
  for (const auto& j : meta.at("cameras")) {
    CameraView c;
    c.intrinsics = {j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                    j.at("cy").get<double>()};
    c.pose.rot = j.at("rot").get<std::array<double, 9>>();
    c.pose.t = detail::vec3_from(j.at("t"));
    s.cameras.push_back(c);
  }
  for (const auto& j : meta.at("utterances")) {
    Utterance u;
    u.text = j.at("text").get<std::string>();
    u.tokens = j.at("tokens").get<std::vector<std::string>>();
    u.target_object_id = j.at("target").get<int>();
    u.anchor_object_ids = j.at("anchors").get<std::vector<int>>();
    u.span_labels = j.at("spans").get<std::vector<int>>();
    s.utterances.push_back(u);
  }
  for (const auto& j : meta.at("views")) {
    RenderedView rv;
    rv.height = j.at("h").get<int>();
    rv.width = j.at("w").get<int>();
    int channels = j.at("channels").get<int>();
    if (channels != kNumChannels)
      throw std::runtime_error("scene_io: unexpected channel count " + std::to_string(channels));
    std::size_t pixels = static_cast<std::size_t>(rv.height) * rv.width;
    rv.depth.height = rv.height;
    rv.depth.width = rv.width;
    rv.depth.d = detail::read_blob<float>(dir / j.at("depth").get<std::string>(), pixels);
    rv.instance = detail::read_blob<std::uint16_t>(dir / j.at("instance").get<std::string>(), pixels);
    rv.channels = detail::read_blob<float>(dir / j.at("features").get<std::string>(),
                                           pixels * kNumChannels);
    data.views.push_back(std::move(rv));
  }
  // The uniqueness guarantee is re-checked on every load.
  for (const auto& u : s.utterances)
    if (!verify_utterance(s, u))
      throw std::runtime_error("scene_io: utterance failed uniqueness verification: " + u.text);
  return data;
}

}  // namespace vg3d
