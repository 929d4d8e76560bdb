#pragma once

// Checkpoint format: a JSON manifest (name, shape, dtype, byte offset per
// entry plus the step counter) next to one little-endian row-major binary
// blob holding all values back to back.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vg3d/params.hpp"
#include <json.hpp>

namespace vg3d {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; big-endian hosts unsupported");

inline constexpr int kCheckpointVersion = 1;

template <class Real>
const char* dtype_name() {
  if constexpr (sizeof(Real) == 4) return "f32";
  else return "f64";
}

template <class Real>
void save_checkpoint(const ParamStoreT<Real>& params, const std::filesystem::path& dir,
                     const std::string& stem = "checkpoint") {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "vg3d-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["step"] = params.step;
  manifest["blob"] = stem + ".bin";
  nlohmann::json entries = nlohmann::json::array();
  std::ofstream blob(dir / (stem + ".bin"), std::ios::binary | std::ios::trunc);
  if (!blob) throw std::runtime_error("checkpoint: cannot open blob for writing");
  std::uint64_t offset = 0;
  for (const auto& name : params.names()) {
    const auto& t = params.at(name);
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = t.shape();
    e["dtype"] = dtype_name<Real>();
    e["offset"] = offset;
    entries.push_back(e);
    const auto& v = t.values();
    blob.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(Real)));
    offset += v.size() * sizeof(Real);
  }
  blob.close();
  manifest["entries"] = entries;
  std::ofstream mf(dir / (stem + ".json"), std::ios::trunc);
  mf << manifest.dump(2) << "\n";
}

// Loads entries into a fresh store in manifest order.
template <class Real>
ParamStoreT<Real> load_checkpoint(const std::filesystem::path& dir,
                                  const std::string& stem = "checkpoint") {
  namespace fs = std::filesystem;
  std::ifstream mf(dir / (stem + ".json"));
  if (!mf) throw ValidationError("checkpoint: manifest not found at " + (dir / (stem + ".json")).string());
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: malformed manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "vg3d-checkpoint")
    throw std::runtime_error("checkpoint: unrecognized format field");
  if (manifest.value("version", -1) != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(manifest.value("version", -1)));
  std::ifstream blob(dir / manifest.at("blob").get<std::string>(), std::ios::binary);
  if (!blob) throw std::runtime_error("checkpoint: blob file missing");
  blob.seekg(0, std::ios::end);
  std::uint64_t blob_size = static_cast<std::uint64_t>(blob.tellg());

  ParamStoreT<Real> params;
  params.step = manifest.value("step", 0);
  for (const auto& e : manifest.at("entries")) {
    std::string name = e.at("name").get<std::string>();
    Shape shape = e.at("shape").get<Shape>();
    std::string dtype = e.at("dtype").get<std::string>();
    if (dtype != dtype_name<Real>())
      throw std::runtime_error("checkpoint: dtype mismatch for " + name + " (" + dtype + ")");
    std::uint64_t offset = e.at("offset").get<std::uint64_t>();
    std::uint64_t bytes = static_cast<std::uint64_t>(shape_numel(shape)) * sizeof(Real);
    if (offset + bytes > blob_size)
      throw std::runtime_error("checkpoint: blob truncated at entry " + name);
    std::vector<Real> data(static_cast<std::size_t>(shape_numel(shape)));
    blob.seekg(static_cast<std::streamoff>(offset));
    blob.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (!blob) throw std::runtime_error("checkpoint: read failed for entry " + name);
    params.create(name, shape, std::move(data));
  }
  return params;
}

}  // namespace vg3d
