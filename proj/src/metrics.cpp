#include "vseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "vseg/morphology.hpp"
#include "vseg/parallel.hpp"
#include "vseg/rng.hpp"

namespace vseg {

namespace {

double point_triangle_distance2(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return ap.norm2();

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return bp.norm2();

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return (ap - v * ab).norm2();
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return cp.norm2();

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return (ap - w * ac).norm2();
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + w * (c - b))).norm2();
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return (p - (a + v * ab + w * ac)).norm2();
}

// Median-split AABB tree over triangles.
class TriangleBvh {
 public:
  explicit TriangleBvh(const std::vector<std::array<Vec3, 3>>& tris) : tris_(tris) {
    order_.resize(tris.size());
    for (std::size_t t = 0; t < tris.size(); ++t) order_[t] = t;
    centroids_.resize(tris.size());
    for (std::size_t t = 0; t < tris.size(); ++t)
      centroids_[t] = (tris[t][0] + tris[t][1] + tris[t][2]) * (1.0 / 3.0);
    if (!tris.empty()) build(0, tris.size());
  }

  double nearest_distance2(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    struct Entry {
      int node;
      double dist2;
    };
    Entry stack[64];
    int top = 0;
    stack[top++] = {0, box_distance2(nodes_[0], p)};
    while (top > 0) {
      const Entry e = stack[--top];
      if (e.dist2 >= best) continue;
      const Node& node = nodes_[e.node];
      if (node.left < 0) {
        for (int t = node.begin; t < node.end; ++t) {
          const auto& tri = tris_[order_[t]];
          best = std::min(best, point_triangle_distance2(p, tri[0], tri[1], tri[2]));
        }
        continue;
      }
      const double dl = box_distance2(nodes_[node.left], p);
      const double dr = box_distance2(nodes_[node.right], p);
      // Push the farther child first so the nearer one is explored next.
      if (dl <= dr) {
        if (dr < best) stack[top++] = {node.right, dr};
        if (dl < best) stack[top++] = {node.left, dl};
      } else {
        if (dl < best) stack[top++] = {node.left, dl};
        if (dr < best) stack[top++] = {node.right, dr};
      }
    }
    return best;
  }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;
    int begin = 0, end = 0;
  };

  static double box_distance2(const Node& n, const Vec3& p) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double lo = n.lo[a], hi = n.hi[a], v = p[a];
      const double d = v < lo ? lo - v : (v > hi ? v - hi : 0.0);
      d2 += d * d;
    }
    return d2;
  }

  int build(std::size_t begin, std::size_t end) {
    const int idx = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi = -lo;
    Vec3 clo = lo, chi = hi;
    for (std::size_t t = begin; t < end; ++t) {
      for (const Vec3& v : tris_[order_[t]]) {
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], v[a]);
          hi[a] = std::max(hi[a], v[a]);
        }
      }
      for (int a = 0; a < 3; ++a) {
        clo[a] = std::min(clo[a], centroids_[order_[t]][a]);
        chi[a] = std::max(chi[a], centroids_[order_[t]][a]);
      }
    }
    nodes_[idx].lo = lo;
    nodes_[idx].hi = hi;

    const std::size_t count = end - begin;
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (chi[a] - clo[a] > chi[axis] - clo[axis]) axis = a;
    if (count <= 4 || !(chi[axis] - clo[axis] > 0.0)) {
      nodes_[idx].begin = static_cast<int>(begin);
      nodes_[idx].end = static_cast<int>(end);
      return idx;
    }

    const std::size_t mid = begin + count / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::size_t ta, std::size_t tb) {
                       return centroids_[ta][axis] < centroids_[tb][axis];
                     });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[idx].left = left;
    nodes_[idx].right = right;
    return idx;
  }

  const std::vector<std::array<Vec3, 3>>& tris_;
  std::vector<std::size_t> order_;
  std::vector<Vec3> centroids_;
  std::vector<Node> nodes_;
};

std::vector<std::array<Vec3, 3>> triangle_soup(const TriMesh& mesh) {
  std::vector<std::array<Vec3, 3>> tris;
  tris.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles)
    tris.push_back({mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]});
  return tris;
}

// Fixed barycentric interior pattern shared by every triangle: the centroid
// first, then seeded folded draws, so repeat runs sample identical points.
std::vector<std::array<double, 3>> interior_pattern(int samples_per_triangle) {
  std::vector<std::array<double, 3>> bary;
  const int m = samples_per_triangle - 2;
  if (m <= 0) return bary;
  bary.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  Rng rng(0x5a3c2e1d00770011ull);
  for (int t = 1; t < m; ++t) {
    double u = rng.uniform01(), v = rng.uniform01();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    bary.push_back({1.0 - u - v, u, v});
  }
  return bary;
}

std::vector<Vec3> sample_points(const TriMesh& mesh, int samples_per_triangle) {
  std::vector<Vec3> points = mesh.vertices;
  const auto pattern = interior_pattern(samples_per_triangle);
  for (const auto& t : mesh.triangles) {
    const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
    for (const auto& w : pattern) points.push_back(a * w[0] + b * w[1] + c * w[2]);
  }
  return points;
}

struct Kahan {
  double sum = 0.0, carry = 0.0;
  void add(double v) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// Distances land in preallocated slots and are reduced serially, so the
// result does not depend on the thread count.
void distances_to(const std::vector<Vec3>& points, const TriangleBvh& bvh, int threads,
                  std::vector<double>& out) {
  out.resize(points.size());
  parallel_for(points.size(), threads,
               [&](std::size_t i) { out[i] = std::sqrt(bvh.nearest_distance2(points[i])); });
}

SurfaceDistances pooled(const std::vector<double>& da, const std::vector<double>& db) {
  Kahan s1, s2;
  for (double d : da) {
    s1.add(d);
    s2.add(d * d);
  }
  for (double d : db) {
    s1.add(d);
    s2.add(d * d);
  }
  const double n = static_cast<double>(da.size() + db.size());
  SurfaceDistances r;
  r.asd = s1.sum / n;
  r.rmsd = std::sqrt(s2.sum / n);
  return r;
}

}  // namespace

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  return std::sqrt(point_triangle_distance2(p, a, b, c));
}

SurfaceDistances surface_distances(const TriMesh& a, const TriMesh& b, int samples_per_triangle,
                                   int threads) {
  if (samples_per_triangle < 1)
    throw std::invalid_argument("surface_distances: samples_per_triangle must be >= 1");
  if (a.empty()) throw std::invalid_argument("surface_distances: first mesh is empty");
  if (b.empty()) throw std::invalid_argument("surface_distances: second mesh is empty");

  const auto tris_a = triangle_soup(a);
  const auto tris_b = triangle_soup(b);
  const TriangleBvh bvh_a(tris_a);
  const TriangleBvh bvh_b(tris_b);
  std::vector<double> da, db;
  distances_to(sample_points(a, samples_per_triangle), bvh_b, threads, da);
  distances_to(sample_points(b, samples_per_triangle), bvh_a, threads, db);
  return pooled(da, db);
}

double gain(double pwc, double pwr, GainDirection direction) {
  if (pwc == 0.0) throw std::invalid_argument("gain: baseline value is zero");
  const double delta = direction == GainDirection::HigherBetter ? pwr - pwc : pwc - pwr;
  return 100.0 * delta / pwc;
}

namespace {

// Foreground voxels with a missing or background 6-neighbour; voxels on the
// grid border count as boundary.
std::vector<Vec3> boundary_points(const BinaryVolume& mask) {
  std::vector<Vec3> points;
  const auto& d = mask.meta.dims;
  for (int k = 0; k < d[2]; ++k) {
    for (int j = 0; j < d[1]; ++j) {
      for (int i = 0; i < d[0]; ++i) {
        if (!mask.at(i, j, k)) continue;
        const bool boundary = i == 0 || i == d[0] - 1 || j == 0 || j == d[1] - 1 || k == 0 ||
                              k == d[2] - 1 || !mask.at(i - 1, j, k) || !mask.at(i + 1, j, k) ||
                              !mask.at(i, j - 1, k) || !mask.at(i, j + 1, k) ||
                              !mask.at(i, j, k - 1) || !mask.at(i, j, k + 1);
        if (boundary) points.push_back(mask.meta.voxel_center(i, j, k));
      }
    }
  }
  return points;
}

std::optional<SurfaceDistances> boundary_voxel_distances(const BinaryVolume& pred,
                                                         const BinaryVolume& truth, int threads) {
  const std::vector<Vec3> pa = boundary_points(pred);
  const std::vector<Vec3> pb = boundary_points(truth);
  if (pa.empty() || pb.empty()) return std::nullopt;
  auto as_tris = [](const std::vector<Vec3>& pts) {
    std::vector<std::array<Vec3, 3>> tris(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) tris[i] = {pts[i], pts[i], pts[i]};
    return tris;
  };
  const auto ta = as_tris(pa);
  const auto tb = as_tris(pb);
  const TriangleBvh bvh_a(ta);
  const TriangleBvh bvh_b(tb);
  std::vector<double> da, db;
  distances_to(pa, bvh_b, threads, da);
  distances_to(pb, bvh_a, threads, db);
  return pooled(da, db);
}

}  // namespace

MetricSet evaluate_case(const Volume& pred, const BinaryVolume& truth, const EvalConfig& config) {
  BinaryVolume pred_mask;
  TriMesh pred_mesh;
  if (const auto* bin = std::get_if<BinaryVolume>(&pred)) {
    if (bin->meta.dims != truth.meta.dims)
      throw std::invalid_argument("evaluate_case: prediction dims do not match truth");
    pred_mask = *bin;
    if (config.distance_source == DistanceSource::Mesh)
      pred_mesh = extract_surface_binary(pred_mask);
  } else {
    const auto& field = std::get<ScalarVolume>(pred);
    if (field.meta.dims != truth.meta.dims)
      throw std::invalid_argument("evaluate_case: prediction dims do not match truth");
    pred_mask = threshold(field, 0.0, ThresholdSense::Below);
    if (config.distance_source == DistanceSource::Mesh)
      pred_mesh = extract_surface_sdf(field);
  }

  MetricSet metrics;
  metrics.dice = dice(pred_mask, truth);
  metrics.contour_dice = contour_dice(pred_mask, truth, config.kernel_radius);

  if (config.distance_source == DistanceSource::BoundaryVoxels) {
    if (auto d = boundary_voxel_distances(pred_mask, truth, config.threads)) {
      metrics.asd = d->asd;
      metrics.rmsd = d->rmsd;
    }
    return metrics;
  }

  const TriMesh truth_mesh = extract_surface_binary(truth);
  if (!pred_mesh.empty() && !truth_mesh.empty()) {
    const SurfaceDistances d =
        surface_distances(pred_mesh, truth_mesh, config.samples_per_triangle, config.threads);
    metrics.asd = d.asd;
    metrics.rmsd = d.rmsd;
  }
  return metrics;
}

}  // namespace vseg
