#pragma once

// Iso-surface extraction. Cells are the cubes between eight neighbouring
// voxel centers; a crossing vertex is placed on every cell edge whose
// endpoint values straddle the iso-level, linearly interpolated, and welded
// across cells so the result is a closed, consistently oriented (outward)
// triangle mesh wherever the surface stays away from the grid border.
// Ambiguous faces are resolved with the asymptotic decider on the sampled
// corner values, which keeps adjacent cells hole-free.

#include <cstddef>
#include <filesystem>
#include <vector>

#include "vseg/geometry.hpp"
#include "vseg/volume.hpp"

namespace vseg {

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::size_t, 3>> triangles;

  bool empty() const { return triangles.empty(); }
};

// 0.5 level of the mask read as 0/1 samples. Empty mask (or full mask) gives
// an empty mesh.
TriMesh extract_surface_binary(const BinaryVolume& mask);

// Zero level of a signed distance field (negative inside). A field with one
// sign everywhere gives an empty mesh.
TriMesh extract_surface_sdf(const ScalarVolume& field);

// Every undirected edge is used by exactly two triangles.
bool mesh_is_closed(const TriMesh& mesh);

// OBJ text: "v x y z" and 1-based "f i j k" lines.
void write_obj(const std::filesystem::path& path, const TriMesh& mesh);
TriMesh read_obj(const std::filesystem::path& path);

}  // namespace vseg
