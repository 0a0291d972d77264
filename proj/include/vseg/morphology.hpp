#pragma once

// Box morphology and overlap scores. Structuring elements are axis-aligned
// boxes given by their radius per axis (a 5x5x5 kernel is radius {2,2,2});
// neighborhoods are clipped at the grid border rather than padded.

#include <array>

#include "vseg/volume.hpp"

namespace vseg {

// Voxel is 1 iff any in-grid voxel of its box neighborhood is 1.
BinaryVolume dilate(const BinaryVolume& mask, const std::array<int, 3>& radius);

// Voxel is 1 iff every in-grid voxel of its box neighborhood is 1.
BinaryVolume erode(const BinaryVolume& mask, const std::array<int, 3>& radius);

// dilate(truth) minus erode(truth).
BinaryVolume contour_band(const BinaryVolume& truth, const std::array<int, 3>& radius);

// 2|A intersect B| / (|A| + |B|); 1.0 when both masks are empty.
double dice(const BinaryVolume& a, const BinaryVolume& b);

// dice restricted to contour_band(truth, radius). Not symmetric: the band
// always comes from the truth mask.
double contour_dice(const BinaryVolume& pred, const BinaryVolume& truth,
                    const std::array<int, 3>& radius = {2, 2, 2});

}  // namespace vseg
