#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "vseg/geometry.hpp"

namespace vseg {

// Grid geometry shared by every volume. Values live at voxel centers; the
// center of voxel (i,j,k) sits at origin + (i*sx, j*sy, k*sz). Linear voxel
// order is x-fastest: index = i + nx*(j + ny*k).
struct GridMeta {
  std::array<int, 3> dims{1, 1, 1};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
  }

  Vec3 voxel_center(int i, int j, int k) const {
    return {origin[0] + i * spacing[0], origin[1] + j * spacing[1], origin[2] + k * spacing[2]};
  }

  void validate() const;  // throws std::invalid_argument on bad dims/spacing

  bool operator==(const GridMeta&) const = default;
};

// Dense 0/1 occupancy grid.
struct BinaryVolume {
  GridMeta meta;
  std::vector<std::uint8_t> voxels;

  BinaryVolume() = default;
  explicit BinaryVolume(const GridMeta& m, std::uint8_t fill = 0)
      : meta(m), voxels(m.voxel_count(), fill) {}

  std::uint8_t at(int i, int j, int k) const { return voxels[meta.index(i, j, k)]; }
  std::size_t foreground_count() const;
};

// Dense grid of finite 32-bit reals (SDF values, network outputs, ...).
struct ScalarVolume {
  GridMeta meta;
  std::vector<float> voxels;

  ScalarVolume() = default;
  explicit ScalarVolume(const GridMeta& m, float fill = 0.0f)
      : meta(m), voxels(m.voxel_count(), fill) {}

  float at(int i, int j, int k) const { return voxels[meta.index(i, j, k)]; }
};

BinaryVolume complement(const BinaryVolume& mask);
ScalarVolume as_scalar(const BinaryVolume& mask);

enum class ThresholdSense { Above, Below };

// Output voxel is 1 iff input > level (Above) or input < level (Below).
// The inequality is strict: a value exactly at the level maps to 0.
BinaryVolume threshold(const ScalarVolume& volume, double level, ThresholdSense sense);

using Volume = std::variant<BinaryVolume, ScalarVolume>;

// VVOL container: 6-byte magic "VVOL1\n", a little-endian u32 header length,
// a JSON header {dims, dtype, order, origin, spacing}, then the raw payload
// little-endian in linear voxel order. dtype is "u8" (binary) or "f32"
// (scalar). Round-trips are bit-exact.
void write_volume(const std::filesystem::path& path, const Volume& volume);
Volume read_volume(const std::filesystem::path& path);

BinaryVolume read_binary_volume(const std::filesystem::path& path);
ScalarVolume read_scalar_volume(const std::filesystem::path& path);

}  // namespace vseg
