#include "vseg/distance.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "vseg/parallel.hpp"

namespace vseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One lower-envelope pass along a line of squared distances. Positions are
// world coordinates step*q. Input values may be +inf (no seed reaches that
// sample yet); infinite parabolas are skipped.
void envelope_pass(const double* f, int n, double step, double* out, int* v, double* z) {
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    const double xq = step * q;
    double s = 0.0;
    while (k >= 0) {
      const double xv = step * v[k];
      s = ((f[q] + xq * xq) - (f[v[k]] + xv * xv)) / (2.0 * (xq - xv));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
    } else {
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = kInf;
    }
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) out[q] = kInf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    const double xq = step * q;
    while (z[j + 1] < xq) ++j;
    const double dx = xq - step * v[j];
    out[q] = f[v[j]] + dx * dx;
  }
}

}  // namespace

SquaredDistanceField edt_brute(const BinaryVolume& mask) {
  const GridMeta& meta = mask.meta;
  meta.validate();
  if (mask.foreground_count() == 0)
    throw std::invalid_argument("edt_brute: mask has no foreground voxel");

  std::vector<std::array<int, 3>> seeds;
  for (int k = 0; k < meta.dims[2]; ++k)
    for (int j = 0; j < meta.dims[1]; ++j)
      for (int i = 0; i < meta.dims[0]; ++i)
        if (mask.at(i, j, k)) seeds.push_back({i, j, k});

  SquaredDistanceField out;
  out.meta = meta;
  out.values.resize(meta.voxel_count());
  const double sx = meta.spacing[0], sy = meta.spacing[1], sz = meta.spacing[2];
  std::size_t idx = 0;
  for (int k = 0; k < meta.dims[2]; ++k)
    for (int j = 0; j < meta.dims[1]; ++j)
      for (int i = 0; i < meta.dims[0]; ++i, ++idx) {
        double best = kInf;
        for (const auto& s : seeds) {
          const double dx = (i - s[0]) * sx, dy = (j - s[1]) * sy, dz = (k - s[2]) * sz;
          const double d2 = dx * dx + dy * dy + dz * dz;
          if (d2 < best) best = d2;
        }
        out.values[idx] = best;
      }
  return out;
}

SquaredDistanceField edt_exact(const BinaryVolume& mask, int threads) {
  const GridMeta& meta = mask.meta;
  meta.validate();
  if (mask.foreground_count() == 0)
    throw std::invalid_argument("edt_exact: mask has no foreground voxel");

  const int nx = meta.dims[0], ny = meta.dims[1], nz = meta.dims[2];
  SquaredDistanceField out;
  out.meta = meta;
  out.values.resize(meta.voxel_count());
  double* d = out.values.data();

  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(nx);
  const std::size_t sz = static_cast<std::size_t>(nx) * ny;

  for (std::size_t i = 0; i < out.values.size(); ++i)
    d[i] = mask.voxels[i] ? 0.0 : kInf;

  struct Axis {
    int n;
    std::size_t stride;
    double step;
    std::size_t lines;
    std::size_t stride_a, stride_b;
    int na, nb;
  };
  // For each pass, the remaining two axes enumerate the lines.
  const Axis passes[3] = {
      {nx, sx, meta.spacing[0], static_cast<std::size_t>(ny) * nz, sy, sz, ny, nz},
      {ny, sy, meta.spacing[1], static_cast<std::size_t>(nx) * nz, sx, sz, nx, nz},
      {nz, sz, meta.spacing[2], static_cast<std::size_t>(nx) * ny, sx, sy, nx, ny},
  };

  for (const Axis& ax : passes) {
    parallel_for(ax.lines, threads, [&](std::size_t line) {
      std::vector<double> f(ax.n), g(ax.n);
      std::vector<int> v(ax.n);
      std::vector<double> z(ax.n + 1);
      const std::size_t a = line % ax.na;
      const std::size_t b = line / ax.na;
      double* base = d + a * ax.stride_a + b * ax.stride_b;
      for (int q = 0; q < ax.n; ++q) f[q] = base[q * ax.stride];
      envelope_pass(f.data(), ax.n, ax.step, g.data(), v.data(), z.data());
      for (int q = 0; q < ax.n; ++q) base[q * ax.stride] = g[q];
    });
  }
  return out;
}

ScalarVolume signed_distance(const BinaryVolume& mask, int threads) {
  const std::size_t fg = mask.foreground_count();
  if (fg == 0)
    throw std::invalid_argument("signed_distance: mask has no foreground voxel");
  if (fg == mask.voxels.size())
    throw std::invalid_argument("signed_distance: mask has no background voxel");

  const SquaredDistanceField to_fg = edt_exact(mask, threads);
  const SquaredDistanceField to_bg = edt_exact(complement(mask), threads);

  ScalarVolume out;
  out.meta = mask.meta;
  out.voxels.resize(mask.voxels.size());
  for (std::size_t i = 0; i < out.voxels.size(); ++i) {
    const double d2 = mask.voxels[i] ? to_bg.values[i] : to_fg.values[i];
    const double d = std::sqrt(d2);
    out.voxels[i] = static_cast<float>(mask.voxels[i] ? -d : d);
  }
  return out;
}

ScalarVolume clamp_sdf(const ScalarVolume& field, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("clamp_sdf: tau must be positive");
  ScalarVolume out = field;
  const float lo = static_cast<float>(-tau), hi = static_cast<float>(tau);
  for (float& v : out.voxels) v = std::min(hi, std::max(lo, v));
  return out;
}

}  // namespace vseg
