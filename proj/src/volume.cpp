#include "vseg/volume.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "VVOL I/O assumes a little-endian host");

namespace vseg {

namespace {

constexpr char kMagic[6] = {'V', 'V', 'O', 'L', '1', '\n'};

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error("vvol: " + what + " (" + path.string() + ")");
}

nlohmann::json meta_to_json(const GridMeta& meta, const char* dtype) {
  nlohmann::json j;
  j["dims"] = meta.dims;
  j["spacing"] = meta.spacing;
  j["origin"] = meta.origin;
  j["dtype"] = dtype;
  j["order"] = "x-fastest";
  return j;
}

}  // namespace

void GridMeta::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw std::invalid_argument("grid dims must be >= 1");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
      throw std::invalid_argument("grid spacing must be positive and finite");
    if (!std::isfinite(origin[a])) throw std::invalid_argument("grid origin must be finite");
  }
}

std::size_t BinaryVolume::foreground_count() const {
  std::size_t n = 0;
  for (std::uint8_t v : voxels) n += v;
  return n;
}

BinaryVolume complement(const BinaryVolume& mask) {
  BinaryVolume out;
  out.meta = mask.meta;
  out.voxels.resize(mask.voxels.size());
  for (std::size_t i = 0; i < mask.voxels.size(); ++i) out.voxels[i] = mask.voxels[i] ? 0 : 1;
  return out;
}

ScalarVolume as_scalar(const BinaryVolume& mask) {
  ScalarVolume out;
  out.meta = mask.meta;
  out.voxels.resize(mask.voxels.size());
  for (std::size_t i = 0; i < mask.voxels.size(); ++i)
    out.voxels[i] = mask.voxels[i] ? 1.0f : 0.0f;
  return out;
}

BinaryVolume threshold(const ScalarVolume& volume, double level, ThresholdSense sense) {
  BinaryVolume out;
  out.meta = volume.meta;
  out.voxels.resize(volume.voxels.size());
  if (sense == ThresholdSense::Above) {
    for (std::size_t i = 0; i < volume.voxels.size(); ++i)
      out.voxels[i] = volume.voxels[i] > level ? 1 : 0;
  } else {
    for (std::size_t i = 0; i < volume.voxels.size(); ++i)
      out.voxels[i] = volume.voxels[i] < level ? 1 : 0;
  }
  return out;
}

void write_volume(const std::filesystem::path& path, const Volume& volume) {
  const GridMeta& meta =
      std::holds_alternative<BinaryVolume>(volume) ? std::get<BinaryVolume>(volume).meta
                                                   : std::get<ScalarVolume>(volume).meta;
  meta.validate();

  // Validate everything before the first byte is written.
  std::string header;
  const void* payload = nullptr;
  std::size_t payload_bytes = 0;
  if (const auto* bin = std::get_if<BinaryVolume>(&volume)) {
    if (bin->voxels.size() != meta.voxel_count())
      fail(path, "voxel count does not match dims");
    for (std::uint8_t v : bin->voxels)
      if (v > 1) fail(path, "binary volume contains a value other than 0/1");
    header = meta_to_json(meta, "u8").dump();
    payload = bin->voxels.data();
    payload_bytes = bin->voxels.size();
  } else {
    const auto& sca = std::get<ScalarVolume>(volume);
    if (sca.voxels.size() != meta.voxel_count())
      fail(path, "voxel count does not match dims");
    for (float v : sca.voxels)
      if (!std::isfinite(v)) fail(path, "scalar volume contains a non-finite value");
    header = meta_to_json(meta, "f32").dump();
    payload = sca.voxels.data();
    payload_bytes = sca.voxels.size() * sizeof(float);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path, "cannot open for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t len = static_cast<std::uint32_t>(header.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(static_cast<const char*>(payload), static_cast<std::streamsize>(payload_bytes));
  if (!out) fail(path, "write failed");
}

Volume read_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open for reading");

  char magic[6];
  if (!in.read(magic, sizeof(magic))) fail(path, "truncated header: missing magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) fail(path, "bad magic");

  std::uint32_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof(len)))
    fail(path, "truncated header: missing length");
  std::string header(len, '\0');
  if (!in.read(header.data(), len)) fail(path, "truncated header");

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    fail(path, std::string("header is not valid JSON: ") + e.what());
  }

  GridMeta meta;
  std::string dtype;
  try {
    j.at("dims").get_to(meta.dims);
    j.at("spacing").get_to(meta.spacing);
    j.at("origin").get_to(meta.origin);
    j.at("dtype").get_to(dtype);
    if (j.at("order").get<std::string>() != "x-fastest") fail(path, "unsupported voxel order");
  } catch (const nlohmann::json::exception& e) {
    fail(path, std::string("header missing required key: ") + e.what());
  }
  try {
    meta.validate();
  } catch (const std::invalid_argument& e) {
    fail(path, std::string("invalid header: ") + e.what());
  }

  std::vector<char> payload((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());

  const std::size_t count = meta.voxel_count();
  if (dtype == "u8") {
    if (payload.size() < count) fail(path, "truncated payload");
    if (payload.size() > count) fail(path, "payload length does not match dims");
    BinaryVolume vol;
    vol.meta = meta;
    vol.voxels.resize(count);
    std::memcpy(vol.voxels.data(), payload.data(), count);
    for (std::uint8_t v : vol.voxels)
      if (v > 1) fail(path, "binary payload contains a value other than 0/1");
    return vol;
  }
  if (dtype == "f32") {
    if (payload.size() < count * sizeof(float)) fail(path, "truncated payload");
    if (payload.size() > count * sizeof(float)) fail(path, "payload length does not match dims");
    ScalarVolume vol;
    vol.meta = meta;
    vol.voxels.resize(count);
    std::memcpy(vol.voxels.data(), payload.data(), count * sizeof(float));
    for (float v : vol.voxels)
      if (!std::isfinite(v)) fail(path, "payload contains a non-finite value");
    return vol;
  }
  fail(path, "unknown dtype \"" + dtype + "\"");
}

BinaryVolume read_binary_volume(const std::filesystem::path& path) {
  Volume v = read_volume(path);
  if (auto* bin = std::get_if<BinaryVolume>(&v)) return std::move(*bin);
  fail(path, "expected a u8 volume");
}

ScalarVolume read_scalar_volume(const std::filesystem::path& path) {
  Volume v = read_volume(path);
  if (auto* sca = std::get_if<ScalarVolume>(&v)) return std::move(*sca);
  fail(path, "expected an f32 volume");
}

}  // namespace vseg
