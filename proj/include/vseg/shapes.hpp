#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vseg/geometry.hpp"
#include "vseg/volume.hpp"

namespace vseg {

enum class ShapeKind { Cuboid, Rhomboid, Ellipsoid, Cylinder };

const char* to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(const std::string& name);

// Parametric primitive in world coordinates. Size parameters by kind:
//   cuboid    - half-extents (a,b,c)
//   rhomboid  - parallelepiped spanned by center +/- e1 +/- e2 +/- e3 with
//               |e1|=a, |e2|=b, |e3|=c; e2 is tilted towards e1 by shear
//               angle alpha and e3 by beta (pi/2 means orthogonal)
//   ellipsoid - semi-axes (a,b,c)
//   cylinder  - radius r = size[0], half-height h = size[1] along local z
struct ShapeSpec {
  ShapeKind kind = ShapeKind::Cuboid;
  Vec3 center{};
  Quat rotation{};
  std::array<double, 3> size{1.0, 1.0, 1.0};
  std::array<double, 2> shear{1.5707963267948966, 1.5707963267948966};  // rhomboid only

  void validate() const;  // throws std::invalid_argument
};

// Membership test at a world point; boundaries are closed (<=).
bool inside(const ShapeSpec& spec, const Vec3& point);

// Rasterize by membership tests at voxel centers.
BinaryVolume voxelize(const ShapeSpec& spec, const GridMeta& meta);

// Closed-form signed distance sampled at voxel centers, negative inside.
// Supported for cuboid and cylinder only; throws for other kinds.
ScalarVolume analytic_sdf(const ShapeSpec& spec, const GridMeta& meta);

enum class Split { Train, Test };

const char* to_string(Split split);

struct DatasetEntry {
  std::string id;
  ShapeSpec spec;
  std::string path;  // VVOL file, relative to the manifest directory
  Split split = Split::Train;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  GridMeta grid;
  std::vector<DatasetEntry> entries;
};

struct GeneratorConfig {
  std::array<int, 3> dims{128, 128, 128};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  int train_per_shape = 8;
  int test_per_shape = 4;
  // Size parameters are drawn uniformly from
  // [size_min_frac, size_max_frac] * min world extent of the grid.
  double size_min_frac = 0.10;
  double size_max_frac = 0.16;
  std::uint64_t seed = 1;
  int max_retries = 32;

  void validate() const;
};

// Draw randomized shapes, voxelize them, and write one VVOL per case under
// out_dir/volumes. Per-case draws derive from (seed, case index), so the
// result is a pure function of the config: re-runs produce byte-identical
// files. A draw whose voxelization comes out empty is retried up to
// max_retries times before the generator gives up.
DatasetManifest generate_dataset(const GeneratorConfig& config,
                                 const std::filesystem::path& out_dir);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace vseg
