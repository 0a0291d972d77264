#pragma once

#include <vector>

#include "vseg/volume.hpp"

namespace vseg {

// Per-voxel squared world distance to the nearest foreground voxel center.
struct SquaredDistanceField {
  GridMeta meta;
  std::vector<double> values;
};

// O(n^2) reference transform; the oracle that pins down edt_exact.
SquaredDistanceField edt_brute(const BinaryVolume& mask);

// Exact Euclidean distance transform via three separable passes of
// lower-envelope (parabola) minimization over squared distances. Anisotropic
// spacing is folded into each axis pass. Matches edt_brute on every voxel.
SquaredDistanceField edt_exact(const BinaryVolume& mask, int threads = 1);

// Signed distance between voxel centers: positive outside the mask, negative
// inside, never zero. Requires both foreground and background to be present.
ScalarVolume signed_distance(const BinaryVolume& mask, int threads = 1);

// Limit values to [-tau, +tau] elementwise.
ScalarVolume clamp_sdf(const ScalarVolume& field, double tau);

}  // namespace vseg
