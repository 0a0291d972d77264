#include "vseg/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "vseg/rng.hpp"

namespace vseg {

namespace {

constexpr double kHalfPi = 1.5707963267948966;

// Edge vectors of the rhomboid in its local frame.
std::array<Vec3, 3> rhomboid_edges(const ShapeSpec& spec) {
  const double a = spec.size[0], b = spec.size[1], c = spec.size[2];
  const double alpha = spec.shear[0], beta = spec.shear[1];
  return {Vec3{a, 0.0, 0.0},
          Vec3{b * std::cos(alpha), b * std::sin(alpha), 0.0},
          Vec3{c * std::cos(beta), 0.0, c * std::sin(beta)}};
}

double max_corner_radius(const std::array<Vec3, 3>& e) {
  double r = 0.0;
  for (int s = 0; s < 8; ++s) {
    const Vec3 corner = (s & 1 ? e[0] : -e[0]) + (s & 2 ? e[1] : -e[1]) + (s & 4 ? e[2] : -e[2]);
    r = std::max(r, corner.norm());
  }
  return r;
}

// Radius of a sphere centered at spec.center that encloses the shape.
double bounding_radius(const ShapeSpec& spec) {
  const double a = spec.size[0], b = spec.size[1], c = spec.size[2];
  switch (spec.kind) {
    case ShapeKind::Cuboid:
      return Vec3{a, b, c}.norm();
    case ShapeKind::Rhomboid:
      return max_corner_radius(rhomboid_edges(spec));
    case ShapeKind::Ellipsoid:
      return std::max({a, b, c});
    case ShapeKind::Cylinder:
      return std::hypot(a, b);
  }
  throw std::logic_error("unreachable shape kind");
}

int size_param_count(ShapeKind kind) {
  return kind == ShapeKind::Cylinder ? 2 : 3;
}

nlohmann::json spec_to_json(const ShapeSpec& spec) {
  nlohmann::json j;
  j["kind"] = to_string(spec.kind);
  j["center"] = {spec.center.x, spec.center.y, spec.center.z};
  j["rotation"] = {spec.rotation.w, spec.rotation.x, spec.rotation.y, spec.rotation.z};
  switch (spec.kind) {
    case ShapeKind::Cuboid:
      j["size"] = {{"half_extents", {spec.size[0], spec.size[1], spec.size[2]}}};
      break;
    case ShapeKind::Rhomboid:
      j["size"] = {{"edges", {spec.size[0], spec.size[1], spec.size[2]}},
                   {"shear", {spec.shear[0], spec.shear[1]}}};
      break;
    case ShapeKind::Ellipsoid:
      j["size"] = {{"semi_axes", {spec.size[0], spec.size[1], spec.size[2]}}};
      break;
    case ShapeKind::Cylinder:
      j["size"] = {{"radius", spec.size[0]}, {"half_height", spec.size[1]}};
      break;
  }
  return j;
}

ShapeSpec spec_from_json(const nlohmann::json& j) {
  ShapeSpec spec;
  spec.kind = shape_kind_from_string(j.at("kind").get<std::string>());
  const auto& c = j.at("center");
  spec.center = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
  const auto& q = j.at("rotation");
  spec.rotation = {q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                   q.at(3).get<double>()};
  const auto& s = j.at("size");
  switch (spec.kind) {
    case ShapeKind::Cuboid:
      s.at("half_extents").get_to(spec.size);
      break;
    case ShapeKind::Rhomboid:
      s.at("edges").get_to(spec.size);
      s.at("shear").get_to(spec.shear);
      break;
    case ShapeKind::Ellipsoid:
      s.at("semi_axes").get_to(spec.size);
      break;
    case ShapeKind::Cylinder:
      // size[2] keeps its default so loaded specs compare equal to drawn ones
      spec.size = {s.at("radius").get<double>(), s.at("half_height").get<double>(), 1.0};
      break;
  }
  spec.validate();
  return spec;
}

}  // namespace

const char* to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Cuboid: return "cuboid";
    case ShapeKind::Rhomboid: return "rhomboid";
    case ShapeKind::Ellipsoid: return "ellipsoid";
    case ShapeKind::Cylinder: return "cylinder";
  }
  throw std::logic_error("unreachable shape kind");
}

ShapeKind shape_kind_from_string(const std::string& name) {
  if (name == "cuboid") return ShapeKind::Cuboid;
  if (name == "rhomboid") return ShapeKind::Rhomboid;
  if (name == "ellipsoid") return ShapeKind::Ellipsoid;
  if (name == "cylinder") return ShapeKind::Cylinder;
  throw std::invalid_argument("unknown shape kind \"" + name + "\"");
}

const char* to_string(Split split) { return split == Split::Train ? "train" : "test"; }

void ShapeSpec::validate() const {
  if (std::abs(rotation.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("shape rotation quaternion is not unit length");
  for (int i = 0; i < size_param_count(kind); ++i)
    if (!(size[i] > 0.0)) throw std::invalid_argument("shape size parameters must be positive");
  if (kind == ShapeKind::Rhomboid) {
    for (double s : shear)
      if (!(s > 0.0 && s <= kHalfPi))
        throw std::invalid_argument("rhomboid shear angles must lie in (0, pi/2]");
  }
}

bool inside(const ShapeSpec& spec, const Vec3& point) {
  const Vec3 p = spec.rotation.conjugate().rotate(point - spec.center);
  switch (spec.kind) {
    case ShapeKind::Cuboid:
      return std::abs(p.x) <= spec.size[0] && std::abs(p.y) <= spec.size[1] &&
             std::abs(p.z) <= spec.size[2];
    case ShapeKind::Rhomboid: {
      const auto e = rhomboid_edges(spec);
      const Vec3 u = Mat3::from_columns(e[0], e[1], e[2]).inverse().mul(p);
      return std::abs(u.x) <= 1.0 && std::abs(u.y) <= 1.0 && std::abs(u.z) <= 1.0;
    }
    case ShapeKind::Ellipsoid: {
      const double qx = p.x / spec.size[0], qy = p.y / spec.size[1], qz = p.z / spec.size[2];
      return qx * qx + qy * qy + qz * qz <= 1.0;
    }
    case ShapeKind::Cylinder:
      return p.x * p.x + p.y * p.y <= spec.size[0] * spec.size[0] &&
             std::abs(p.z) <= spec.size[1];
  }
  throw std::logic_error("unreachable shape kind");
}

BinaryVolume voxelize(const ShapeSpec& spec, const GridMeta& meta) {
  spec.validate();
  meta.validate();
  BinaryVolume out(meta);
  // Hoist the inverse basis for the rhomboid out of the voxel loop.
  const Quat inv_rot = spec.rotation.conjugate();
  Mat3 inv_basis;
  if (spec.kind == ShapeKind::Rhomboid) {
    const auto e = rhomboid_edges(spec);
    inv_basis = Mat3::from_columns(e[0], e[1], e[2]).inverse();
  }
  std::size_t idx = 0;
  for (int k = 0; k < meta.dims[2]; ++k)
    for (int j = 0; j < meta.dims[1]; ++j)
      for (int i = 0; i < meta.dims[0]; ++i, ++idx) {
        const Vec3 p = inv_rot.rotate(meta.voxel_center(i, j, k) - spec.center);
        bool in = false;
        switch (spec.kind) {
          case ShapeKind::Cuboid:
            in = std::abs(p.x) <= spec.size[0] && std::abs(p.y) <= spec.size[1] &&
                 std::abs(p.z) <= spec.size[2];
            break;
          case ShapeKind::Rhomboid: {
            const Vec3 u = inv_basis.mul(p);
            in = std::abs(u.x) <= 1.0 && std::abs(u.y) <= 1.0 && std::abs(u.z) <= 1.0;
            break;
          }
          case ShapeKind::Ellipsoid: {
            const double qx = p.x / spec.size[0], qy = p.y / spec.size[1],
                         qz = p.z / spec.size[2];
            in = qx * qx + qy * qy + qz * qz <= 1.0;
            break;
          }
          case ShapeKind::Cylinder:
            in = p.x * p.x + p.y * p.y <= spec.size[0] * spec.size[0] &&
                 std::abs(p.z) <= spec.size[1];
            break;
        }
        out.voxels[idx] = in ? 1 : 0;
      }
  return out;
}

ScalarVolume analytic_sdf(const ShapeSpec& spec, const GridMeta& meta) {
  spec.validate();
  meta.validate();
  if (spec.kind != ShapeKind::Cuboid && spec.kind != ShapeKind::Cylinder)
    throw std::invalid_argument("analytic_sdf supports cuboid and cylinder only");

  ScalarVolume out(meta);
  const Quat inv_rot = spec.rotation.conjugate();
  std::size_t idx = 0;
  for (int k = 0; k < meta.dims[2]; ++k)
    for (int j = 0; j < meta.dims[1]; ++j)
      for (int i = 0; i < meta.dims[0]; ++i, ++idx) {
        const Vec3 p = inv_rot.rotate(meta.voxel_center(i, j, k) - spec.center);
        double d = 0.0;
        if (spec.kind == ShapeKind::Cuboid) {
          const double qx = std::abs(p.x) - spec.size[0];
          const double qy = std::abs(p.y) - spec.size[1];
          const double qz = std::abs(p.z) - spec.size[2];
          const double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0), oz = std::max(qz, 0.0);
          d = std::sqrt(ox * ox + oy * oy + oz * oz) +
              std::min(std::max({qx, qy, qz}), 0.0);
        } else {
          const double er = std::hypot(p.x, p.y) - spec.size[0];
          const double ez = std::abs(p.z) - spec.size[1];
          const double orr = std::max(er, 0.0), oz = std::max(ez, 0.0);
          d = std::sqrt(orr * orr + oz * oz) + std::min(std::max(er, ez), 0.0);
        }
        out.voxels[idx] = static_cast<float>(d);
      }
  return out;
}

void GeneratorConfig::validate() const {
  GridMeta meta{dims, spacing, {0, 0, 0}};
  meta.validate();
  if (train_per_shape < 0 || test_per_shape < 0)
    throw std::invalid_argument("per-shape counts must be non-negative");
  if (!(size_min_frac > 0.0) || !(size_max_frac >= size_min_frac))
    throw std::invalid_argument("size range is empty or non-positive");
  if (max_retries < 1) throw std::invalid_argument("max_retries must be >= 1");

  // Worst-case bounding radius over all kinds is the rhomboid with three
  // maximal edges at the tightest drawn shear (pi/4 on both angles): the far
  // corner sits at (1+sqrt2, 1/sqrt2, 1/sqrt2)*hi, radius sqrt(4+2*sqrt2)*hi
  // ~= 2.614*hi. It must fit inside the central 90% of the grid.
  double min_extent = std::numeric_limits<double>::max();
  for (int a = 0; a < 3; ++a) min_extent = std::min(min_extent, dims[a] * spacing[a]);
  const double worst = std::sqrt(4.0 + 2.0 * std::sqrt(2.0)) * size_max_frac * min_extent;
  for (int a = 0; a < 3; ++a) {
    const double extent = dims[a] * spacing[a];
    if (2.0 * worst > 0.9 * extent)
      throw std::invalid_argument(
          "size range too large: a shape's bounding sphere may not fit inside 90% of the grid");
  }
}

namespace {

ShapeSpec draw_spec(ShapeKind kind, const GridMeta& meta, const GeneratorConfig& config,
                    Rng& rng) {
  double min_extent = std::numeric_limits<double>::max();
  for (int a = 0; a < 3; ++a) min_extent = std::min(min_extent, meta.dims[a] * meta.spacing[a]);
  const double lo = config.size_min_frac * min_extent;
  const double hi = config.size_max_frac * min_extent;

  ShapeSpec spec;
  spec.kind = kind;
  for (int i = 0; i < size_param_count(kind); ++i) spec.size[i] = rng.uniform(lo, hi);
  if (kind == ShapeKind::Rhomboid)
    for (double& s : spec.shear) s = rng.uniform(kHalfPi / 2.0, kHalfPi);

  // Uniform rotation: normalized 4-vector of standard normals.
  Quat q{rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian()};
  spec.rotation = q.normalized();

  const double r = bounding_radius(spec);
  for (int a = 0; a < 3; ++a) {
    const double extent = meta.dims[a] * meta.spacing[a];
    const double box_lo = meta.origin[a] - 0.5 * meta.spacing[a] + 0.05 * extent + r;
    const double box_hi = meta.origin[a] - 0.5 * meta.spacing[a] + 0.95 * extent - r;
    if (box_lo > box_hi)
      throw std::runtime_error("drawn shape cannot be placed inside 90% of the grid");
    const double c = rng.uniform(box_lo, box_hi);
    if (a == 0) spec.center.x = c;
    else if (a == 1) spec.center.y = c;
    else spec.center.z = c;
  }
  return spec;
}

}  // namespace

DatasetManifest generate_dataset(const GeneratorConfig& config,
                                 const std::filesystem::path& out_dir) {
  config.validate();
  const GridMeta meta{config.dims, config.spacing, {0.0, 0.0, 0.0}};

  std::filesystem::create_directories(out_dir / "volumes");

  DatasetManifest manifest;
  manifest.seed = config.seed;
  manifest.grid = meta;

  constexpr ShapeKind kKinds[] = {ShapeKind::Cuboid, ShapeKind::Rhomboid, ShapeKind::Ellipsoid,
                                  ShapeKind::Cylinder};
  std::uint64_t case_index = 0;
  for (Split split : {Split::Train, Split::Test}) {
    const int count = split == Split::Train ? config.train_per_shape : config.test_per_shape;
    for (ShapeKind kind : kKinds) {
      for (int n = 0; n < count; ++n, ++case_index) {
        Rng rng(mix_seed(config.seed, case_index));
        ShapeSpec spec;
        BinaryVolume vol;
        bool ok = false;
        for (int attempt = 0; attempt < config.max_retries; ++attempt) {
          spec = draw_spec(kind, meta, config, rng);
          vol = voxelize(spec, meta);
          if (vol.foreground_count() > 0) {
            ok = true;
            break;
          }
        }
        if (!ok)
          throw std::runtime_error(std::string("generate_dataset: case ") +
                                   std::to_string(case_index) + " voxelized empty " +
                                   std::to_string(config.max_retries) + " times");

        char id[64];
        std::snprintf(id, sizeof(id), "%s-%s-%03d", to_string(split), to_string(kind), n);
        DatasetEntry entry;
        entry.id = id;
        entry.spec = spec;
        entry.split = split;
        entry.path = std::string("volumes/") + id + ".vvol";
        write_volume(out_dir / entry.path, vol);
        manifest.entries.push_back(std::move(entry));
      }
    }
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  nlohmann::json j;
  j["seed"] = manifest.seed;
  j["grid"] = {{"dims", manifest.grid.dims},
               {"spacing", manifest.grid.spacing},
               {"origin", manifest.grid.origin}};
  auto& entries = j["entries"] = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    nlohmann::json je = spec_to_json(e.spec);
    je["id"] = e.id;
    je["path"] = e.path;
    je["split"] = to_string(e.split);
    entries.push_back(std::move(je));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  DatasetManifest manifest;
  manifest.seed = j.at("seed").get<std::uint64_t>();
  j.at("grid").at("dims").get_to(manifest.grid.dims);
  j.at("grid").at("spacing").get_to(manifest.grid.spacing);
  j.at("grid").at("origin").get_to(manifest.grid.origin);
  manifest.grid.validate();
  for (const auto& je : j.at("entries")) {
    DatasetEntry e;
    e.id = je.at("id").get<std::string>();
    e.path = je.at("path").get<std::string>();
    const std::string split = je.at("split").get<std::string>();
    if (split == "train") e.split = Split::Train;
    else if (split == "test") e.split = Split::Test;
    else throw std::runtime_error("manifest entry " + e.id + " has unknown split " + split);
    e.spec = spec_from_json(je);
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

}  // namespace vseg
