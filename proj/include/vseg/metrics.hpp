#pragma once

// The four per-case evaluation metrics and the report's gain arithmetic.
// Distances are measured in world units between triangle surfaces: each
// sample point on one mesh takes its exact minimum distance to the whole
// other mesh, both directions pooled into one sample.

#include <array>
#include <optional>

#include "vseg/geometry.hpp"
#include "vseg/surface.hpp"
#include "vseg/volume.hpp"

namespace vseg {

struct MetricSet {
  double dice = 0.0;
  double contour_dice = 0.0;
  std::optional<double> asd;
  std::optional<double> rmsd;
};

struct SurfaceDistances {
  double asd = 0.0;
  double rmsd = 0.0;
};

// Samples are the mesh vertices plus (samples_per_triangle - 2) fixed interior
// points per triangle; the default 3 adds each triangle's centroid. Throws if
// either mesh is empty, naming which one.
SurfaceDistances surface_distances(const TriMesh& a, const TriMesh& b,
                                   int samples_per_triangle = 3, int threads = 1);

enum class GainDirection { HigherBetter, LowerBetter };

// Percent improvement of pwr over pwc. HigherBetter: 100*(pwr - pwc)/pwc;
// LowerBetter: 100*(pwc - pwr)/pwc. pwc must be nonzero.
double gain(double pwc, double pwr, GainDirection direction);

enum class DistanceSource { Mesh, BoundaryVoxels };

struct EvalConfig {
  std::array<int, 3> kernel_radius{2, 2, 2};
  int samples_per_triangle = 3;
  DistanceSource distance_source = DistanceSource::Mesh;
  int threads = 1;
};

// pred as BinaryVolume is a labelmap (0.5-level surface); as ScalarVolume it
// is a signed distance field (0-level surface, negative inside, segmentation
// = field < 0). dice/contour_dice always computed; asd/rmsd left empty when
// either surface comes up empty.
MetricSet evaluate_case(const Volume& pred, const BinaryVolume& truth,
                        const EvalConfig& config = {});

// Exact closest distance from a point to a triangle (exposed for oracles).
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace vseg
