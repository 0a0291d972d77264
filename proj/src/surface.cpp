#include "vseg/surface.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace vseg {

namespace {

// Cell corners are numbered dx + 2*dy + 4*dz. Cell edges run along +axis from
// a lower corner; ids: 0-3 x-edges (dy + 2*dz), 4-7 y-edges (dx + 2*dz),
// 8-11 z-edges (dx + 2*dy).
struct CellEdge {
  int axis, ox, oy, oz;
};
constexpr CellEdge kEdges[12] = {
    {0, 0, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}, {0, 0, 1, 1},
    {1, 0, 0, 0}, {1, 1, 0, 0}, {1, 0, 0, 1}, {1, 1, 0, 1},
    {2, 0, 0, 0}, {2, 1, 0, 0}, {2, 0, 1, 0}, {2, 1, 1, 0},
};

// Face corners listed counter-clockwise as seen from outside the cell;
// edge[m] is the cell edge joining corner[m] to corner[(m+1)%4].
struct Face {
  int corner[4];
  int edge[4];
};
constexpr Face kFaces[6] = {
    {{0, 2, 3, 1}, {4, 1, 5, 0}},    // -z
    {{0, 1, 5, 4}, {0, 9, 2, 8}},    // -y
    {{0, 4, 6, 2}, {8, 6, 10, 4}},   // -x
    {{4, 5, 7, 6}, {2, 7, 3, 6}},    // +z
    {{2, 6, 7, 3}, {10, 3, 11, 1}},  // +y
    {{1, 3, 7, 5}, {5, 11, 7, 9}},   // +x
};

inline int edge_low_corner(int e) {
  return kEdges[e].ox + 2 * kEdges[e].oy + 4 * kEdges[e].oz;
}
inline int edge_high_corner(int e) {
  return edge_low_corner(e) + (kEdges[e].axis == 0 ? 1 : kEdges[e].axis == 1 ? 2 : 4);
}

// The signed sample: positive strictly inside the surface. Contour segments
// on each face are directed so the inside lies left when viewed from outside
// the cell; chaining them 1-in-1-out across the cell's edges yields closed
// loops, and the paired face of the neighbouring cell traverses the shared
// edge the opposite way, which is what makes the welded mesh watertight.
template <typename G>
TriMesh extract_iso(const GridMeta& meta, G&& g) {
  TriMesh mesh;
  const int nx = meta.dims[0], ny = meta.dims[1], nz = meta.dims[2];
  std::unordered_map<std::uint64_t, std::size_t> edge_vertex;

  double gv[8];
  int next_edge[12];
  for (int k = 0; k + 1 < nz; ++k) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        bool any_in = false, any_out = false;
        for (int c = 0; c < 8; ++c) {
          gv[c] = g(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
          (gv[c] > 0.0 ? any_in : any_out) = true;
        }
        if (!any_in || !any_out) continue;

        for (int e = 0; e < 12; ++e) next_edge[e] = -1;
        for (const Face& face : kFaces) {
          bool in[4];
          int count = 0;
          for (int m = 0; m < 4; ++m) {
            in[m] = gv[face.corner[m]] > 0.0;
            count += in[m];
          }
          if (count == 0 || count == 4) continue;

          int crossings = 0;
          for (int m = 0; m < 4; ++m) crossings += in[m] != in[(m + 1) % 4];
          bool connect_inside = false;
          if (crossings == 4) {
            // Two diagonal inside corners: the bilinear saddle value decides
            // whether the inside region is connected across this face.
            const int p = in[0] ? 0 : 1;
            connect_inside = gv[face.corner[p]] * gv[face.corner[p + 2]] -
                                 gv[face.corner[p + 1]] * gv[face.corner[(p + 3) % 4]] >
                             0.0;
          }
          for (int m = 0; m < 4; ++m) {
            if (!(in[m] && !in[(m + 1) % 4])) continue;
            int to_pos;
            if (crossings == 2) {
              to_pos = -1;
              for (int t = 0; t < 4; ++t)
                if (!in[t] && in[(t + 1) % 4]) to_pos = t;
            } else {
              to_pos = connect_inside ? (m + 1) % 4 : (m + 3) % 4;
            }
            next_edge[face.edge[m]] = face.edge[to_pos];
          }
        }

        // Weld crossing vertices by their global grid-edge key.
        std::size_t loop_vertex[12];
        bool used[12] = {};
        for (int start = 0; start < 12; ++start) {
          if (next_edge[start] < 0 || used[start]) continue;
          int len = 0;
          int e = start;
          do {
            if (len == 12) throw std::logic_error("surface: contour loop failed to close");
            used[e] = true;
            const CellEdge& ce = kEdges[e];
            const int gi = i + ce.ox, gj = j + ce.oy, gk = k + ce.oz;
            const std::uint64_t key =
                static_cast<std::uint64_t>(ce.axis) * meta.voxel_count() + meta.index(gi, gj, gk);
            auto [it, inserted] = edge_vertex.try_emplace(key, mesh.vertices.size());
            if (inserted) {
              const double gu = gv[edge_low_corner(e)];
              const double gw = gv[edge_high_corner(e)];
              const double t = gu / (gu - gw);
              Vec3 p = meta.voxel_center(gi, gj, gk);
              p[ce.axis] += t * meta.spacing[ce.axis];
              mesh.vertices.push_back(p);
            }
            loop_vertex[len++] = it->second;
            e = next_edge[e];
          } while (e != start);
          // Loops chain with the inside on the left seen from outside, which
          // winds the fan inward; emit reversed for outward normals.
          for (int m = 1; m + 1 < len; ++m)
            mesh.triangles.push_back({loop_vertex[0], loop_vertex[m + 1], loop_vertex[m]});
        }
      }
    }
  }
  return mesh;
}

constexpr double kZeroNudge = -1e-300;

}  // namespace

TriMesh extract_surface_binary(const BinaryVolume& mask) {
  return extract_iso(mask.meta,
                     [&](int i, int j, int k) { return mask.at(i, j, k) ? 0.5 : -0.5; });
}

TriMesh extract_surface_sdf(const ScalarVolume& field) {
  return extract_iso(field.meta, [&](int i, int j, int k) {
    const double v = -static_cast<double>(field.at(i, j, k));
    return v == 0.0 ? kZeroNudge : v;
  });
}

bool mesh_is_closed(const TriMesh& mesh) {
  std::unordered_map<std::uint64_t, int> edge_count;
  for (const auto& tri : mesh.triangles) {
    for (int m = 0; m < 3; ++m) {
      const std::size_t a = tri[m], b = tri[(m + 1) % 3];
      const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) |
                                static_cast<std::uint64_t>(std::max(a, b));
      ++edge_count[key];
    }
  }
  for (const auto& [key, count] : edge_count)
    if (count != 2) return false;
  return true;
}

void write_obj(const std::filesystem::path& path, const TriMesh& mesh) {
  for (const auto& tri : mesh.triangles)
    for (std::size_t idx : tri)
      if (idx >= mesh.vertices.size())
        throw std::invalid_argument("obj: triangle index out of range");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("obj: cannot open for writing (" + path.string() + ")");
  char line[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(line, sizeof(line), "v %.17g %.17g %.17g\n", v[0], v[1], v[2]);
    out << line;
  }
  for (const auto& tri : mesh.triangles) {
    std::snprintf(line, sizeof(line), "f %zu %zu %zu\n", tri[0] + 1, tri[1] + 1, tri[2] + 1);
    out << line;
  }
  if (!out) throw std::runtime_error("obj: write failed (" + path.string() + ")");
}

TriMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("obj: cannot open for reading (" + path.string() + ")");
  TriMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v[0] >> v[1] >> v[2]))
        throw std::runtime_error("obj: malformed vertex line (" + path.string() + ")");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<std::size_t, 3> tri;
      for (int m = 0; m < 3; ++m) {
        std::string tok;
        if (!(ss >> tok)) throw std::runtime_error("obj: malformed face line (" + path.string() + ")");
        const long idx = std::strtol(tok.c_str(), nullptr, 10);
        if (idx < 1) throw std::runtime_error("obj: face index must be positive (" + path.string() + ")");
        tri[m] = static_cast<std::size_t>(idx - 1);
      }
      mesh.triangles.push_back(tri);
    }
  }
  for (const auto& tri : mesh.triangles)
    for (std::size_t idx : tri)
      if (idx >= mesh.vertices.size())
        throw std::runtime_error("obj: face index out of range (" + path.string() + ")");
  return mesh;
}

}  // namespace vseg
