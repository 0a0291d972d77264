#pragma once

#include "vseg/volume.hpp"

namespace vseg {

// All resampling uses the align-centers rule: the source continuous
// coordinate of output index i along an axis is (i + 0.5)*(n_src/n_dst) - 0.5.
// Coordinates outside the source index range are clamped (edge replication).
// Output spacing is scaled by n_src/n_dst per axis and the origin is shifted
// so sample points keep their world positions.

ScalarVolume resample_trilinear(const ScalarVolume& volume, const std::array<int, 3>& target_dims);

ScalarVolume resample_nearest(const ScalarVolume& volume, const std::array<int, 3>& target_dims);
BinaryVolume resample_nearest(const BinaryVolume& volume, const std::array<int, 3>& target_dims);

// Coarse training labels: the mask viewed as a 0/1 scalar field, trilinearly
// resampled, then thresholded strictly above 0.5.
BinaryVolume downsample_label(const BinaryVolume& mask, const std::array<int, 3>& target_dims);

}  // namespace vseg
