#include "vseg/resample.hpp"

#include <cmath>
#include <stdexcept>

namespace vseg {

namespace {

GridMeta target_meta(const GridMeta& src, const std::array<int, 3>& target_dims) {
  for (int a = 0; a < 3; ++a)
    if (target_dims[a] < 1) throw std::invalid_argument("resample: target dims must be >= 1");
  GridMeta meta = src;
  meta.dims = target_dims;
  for (int a = 0; a < 3; ++a) {
    const double ratio = static_cast<double>(src.dims[a]) / target_dims[a];
    meta.spacing[a] = src.spacing[a] * ratio;
    // World position of output sample 0: src coordinate 0.5*ratio - 0.5.
    meta.origin[a] = src.origin[a] + src.spacing[a] * (0.5 * ratio - 0.5);
  }
  return meta;
}

inline double source_coord(int i, double ratio) { return (i + 0.5) * ratio - 0.5; }

inline double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

ScalarVolume resample_trilinear(const ScalarVolume& volume,
                                const std::array<int, 3>& target_dims) {
  const GridMeta& src = volume.meta;
  ScalarVolume out(target_meta(src, target_dims));
  const int nx = src.dims[0], ny = src.dims[1], nz = src.dims[2];
  const double rx = static_cast<double>(nx) / target_dims[0];
  const double ry = static_cast<double>(ny) / target_dims[1];
  const double rz = static_cast<double>(nz) / target_dims[2];

  std::size_t idx = 0;
  for (int k = 0; k < target_dims[2]; ++k) {
    const double cz = clamp(source_coord(k, rz), 0.0, nz - 1.0);
    const int k0 = static_cast<int>(std::floor(cz));
    const int k1 = std::min(k0 + 1, nz - 1);
    const double fz = cz - k0;
    for (int j = 0; j < target_dims[1]; ++j) {
      const double cy = clamp(source_coord(j, ry), 0.0, ny - 1.0);
      const int j0 = static_cast<int>(std::floor(cy));
      const int j1 = std::min(j0 + 1, ny - 1);
      const double fy = cy - j0;
      for (int i = 0; i < target_dims[0]; ++i, ++idx) {
        const double cx = clamp(source_coord(i, rx), 0.0, nx - 1.0);
        const int i0 = static_cast<int>(std::floor(cx));
        const int i1 = std::min(i0 + 1, nx - 1);
        const double fx = cx - i0;

        const double v000 = volume.at(i0, j0, k0), v100 = volume.at(i1, j0, k0);
        const double v010 = volume.at(i0, j1, k0), v110 = volume.at(i1, j1, k0);
        const double v001 = volume.at(i0, j0, k1), v101 = volume.at(i1, j0, k1);
        const double v011 = volume.at(i0, j1, k1), v111 = volume.at(i1, j1, k1);

        const double c00 = v000 + (v100 - v000) * fx;
        const double c10 = v010 + (v110 - v010) * fx;
        const double c01 = v001 + (v101 - v001) * fx;
        const double c11 = v011 + (v111 - v011) * fx;
        const double c0 = c00 + (c10 - c00) * fy;
        const double c1 = c01 + (c11 - c01) * fy;
        out.voxels[idx] = static_cast<float>(c0 + (c1 - c0) * fz);
      }
    }
  }
  return out;
}

namespace {

// Nearest source index under align-centers, ties broken toward the lower
// index: ceil(c - 0.5) maps an exact .5 fraction down.
inline int nearest_index(int i, double ratio, int n_src) {
  const double c = source_coord(i, ratio);
  const int idx = static_cast<int>(std::ceil(c - 0.5));
  return idx < 0 ? 0 : (idx > n_src - 1 ? n_src - 1 : idx);
}

template <typename Vol>
Vol resample_nearest_impl(const Vol& volume, const std::array<int, 3>& target_dims) {
  const GridMeta& src = volume.meta;
  Vol out(target_meta(src, target_dims));
  const double rx = static_cast<double>(src.dims[0]) / target_dims[0];
  const double ry = static_cast<double>(src.dims[1]) / target_dims[1];
  const double rz = static_cast<double>(src.dims[2]) / target_dims[2];
  std::size_t idx = 0;
  for (int k = 0; k < target_dims[2]; ++k) {
    const int sk = nearest_index(k, rz, src.dims[2]);
    for (int j = 0; j < target_dims[1]; ++j) {
      const int sj = nearest_index(j, ry, src.dims[1]);
      for (int i = 0; i < target_dims[0]; ++i, ++idx)
        out.voxels[idx] = volume.at(nearest_index(i, rx, src.dims[0]), sj, sk);
    }
  }
  return out;
}

}  // namespace

ScalarVolume resample_nearest(const ScalarVolume& volume, const std::array<int, 3>& target_dims) {
  return resample_nearest_impl(volume, target_dims);
}

BinaryVolume resample_nearest(const BinaryVolume& volume, const std::array<int, 3>& target_dims) {
  return resample_nearest_impl(volume, target_dims);
}

BinaryVolume downsample_label(const BinaryVolume& mask, const std::array<int, 3>& target_dims) {
  for (int a = 0; a < 3; ++a)
    if (target_dims[a] > mask.meta.dims[a])
      throw std::invalid_argument("downsample_label: target dims exceed source dims");
  return threshold(resample_trilinear(as_scalar(mask), target_dims), 0.5,
                   ThresholdSense::Above);
}

}  // namespace vseg
