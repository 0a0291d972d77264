#include "vseg/morphology.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace vseg {

namespace {

void check_radius(const std::array<int, 3>& radius) {
  for (int a = 0; a < 3; ++a)
    if (radius[a] < 0) throw std::invalid_argument("morphology: kernel radius must be >= 0");
}

// One separable pass along `axis`: window counts via prefix sums, then either
// any-voxel-set (dilate) or all-voxels-set (erode) against the clipped window
// length.
void box_pass(const BinaryVolume& in, BinaryVolume& out, int axis, int radius, bool dilate_pass) {
  const auto& d = in.meta.dims;
  const int n = d[axis];
  const int na = axis == 0 ? d[1] : d[0];
  const int nb = axis == 2 ? d[1] : d[2];
  const std::size_t stride = axis == 0 ? 1 : in.meta.index(0, axis == 1 ? 1 : 0, axis == 2 ? 1 : 0);
  std::vector<int> prefix(n + 1);

  for (int b = 0; b < nb; ++b) {
    for (int a = 0; a < na; ++a) {
      std::size_t base;
      if (axis == 0)
        base = in.meta.index(0, a, b);
      else if (axis == 1)
        base = in.meta.index(a, 0, b);
      else
        base = in.meta.index(a, b, 0);
      prefix[0] = 0;
      for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + in.voxels[base + i * stride];
      for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - radius);
        const int hi = std::min(n - 1, i + radius);
        const int count = prefix[hi + 1] - prefix[lo];
        const bool set = dilate_pass ? count > 0 : count == hi - lo + 1;
        out.voxels[base + i * stride] = set ? 1 : 0;
      }
    }
  }
}

BinaryVolume box_filter(const BinaryVolume& mask, const std::array<int, 3>& radius,
                        bool dilate_pass) {
  check_radius(radius);
  BinaryVolume cur = mask;
  BinaryVolume next(mask.meta);
  for (int axis = 0; axis < 3; ++axis) {
    if (radius[axis] == 0) continue;
    box_pass(cur, next, axis, radius[axis], dilate_pass);
    std::swap(cur, next);
  }
  return cur;
}

}  // namespace

BinaryVolume dilate(const BinaryVolume& mask, const std::array<int, 3>& radius) {
  return box_filter(mask, radius, true);
}

BinaryVolume erode(const BinaryVolume& mask, const std::array<int, 3>& radius) {
  return box_filter(mask, radius, false);
}

BinaryVolume contour_band(const BinaryVolume& truth, const std::array<int, 3>& radius) {
  BinaryVolume band = dilate(truth, radius);
  const BinaryVolume inner = erode(truth, radius);
  for (std::size_t i = 0; i < band.voxels.size(); ++i)
    if (inner.voxels[i]) band.voxels[i] = 0;
  return band;
}

double dice(const BinaryVolume& a, const BinaryVolume& b) {
  if (a.meta.dims != b.meta.dims)
    throw std::invalid_argument("dice: volume dims differ");
  std::size_t na = 0, nb = 0, ni = 0;
  for (std::size_t i = 0; i < a.voxels.size(); ++i) {
    na += a.voxels[i];
    nb += b.voxels[i];
    ni += a.voxels[i] & b.voxels[i];
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(ni) / static_cast<double>(na + nb);
}

double contour_dice(const BinaryVolume& pred, const BinaryVolume& truth,
                    const std::array<int, 3>& radius) {
  if (pred.meta.dims != truth.meta.dims)
    throw std::invalid_argument("contour_dice: volume dims differ");
  const BinaryVolume band = contour_band(truth, radius);
  BinaryVolume pa(pred.meta), tb(truth.meta);
  for (std::size_t i = 0; i < band.voxels.size(); ++i) {
    pa.voxels[i] = pred.voxels[i] & band.voxels[i];
    tb.voxels[i] = truth.voxels[i] & band.voxels[i];
  }
  return dice(pa, tb);
}

}  // namespace vseg
