#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "vseg/resample.hpp"
#include "vseg/rng.hpp"
#include "vseg/volume.hpp"

using namespace vseg;

namespace {

// Straight transcription of the align-centers rule with edge clamping,
// kept independent of the library implementation.
double oracle_trilinear(const ScalarVolume& src, const std::array<int, 3>& dst_dims, int i, int j,
                        int k) {
  const std::array<int, 3> out{i, j, k};
  double c[3];
  for (int a = 0; a < 3; ++a)
    c[a] = (out[a] + 0.5) * (static_cast<double>(src.meta.dims[a]) / dst_dims[a]) - 0.5;

  int lo[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    double cl = c[a];
    if (cl < 0.0) cl = 0.0;
    const double hi = src.meta.dims[a] - 1.0;
    if (cl > hi) cl = hi;
    lo[a] = static_cast<int>(std::floor(cl));
    if (lo[a] > src.meta.dims[a] - 2) lo[a] = src.meta.dims[a] - 2;
    if (lo[a] < 0) lo[a] = 0;
    f[a] = cl - lo[a];
    if (src.meta.dims[a] == 1) {
      lo[a] = 0;
      f[a] = 0.0;
    }
  }

  double sum = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const int x = std::min(lo[0] + dx, src.meta.dims[0] - 1);
        const int y = std::min(lo[1] + dy, src.meta.dims[1] - 1);
        const int z = std::min(lo[2] + dz, src.meta.dims[2] - 1);
        const double w = (dx ? f[0] : 1.0 - f[0]) * (dy ? f[1] : 1.0 - f[1]) * (dz ? f[2] : 1.0 - f[2]);
        sum += w * src.voxels[src.meta.index(x, y, z)];
      }
  return sum;
}

ScalarVolume random_field(const GridMeta& meta, std::uint64_t seed) {
  Rng rng(seed);
  ScalarVolume v(meta);
  for (auto& x : v.voxels) x = static_cast<float>(rng.uniform(-2.0, 2.0));
  return v;
}

}  // namespace

TEST_CASE("constant fields stay constant at any target size") {
  GridMeta meta{{8, 8, 8}, {1, 1, 1}, {0, 0, 0}};
  ScalarVolume v(meta, 3.25f);
  for (const std::array<int, 3>& dims : {std::array<int, 3>{4, 4, 4}, {3, 5, 7}, {16, 16, 16}}) {
    const ScalarVolume out = resample_trilinear(v, dims);
    REQUIRE(out.meta.dims == dims);
    for (float x : out.voxels) REQUIRE(x == 3.25f);
  }
}

TEST_CASE("resampling to the same dims is the identity") {
  GridMeta meta{{8, 8, 8}, {0.5, 1, 2}, {1, 2, 3}};
  ScalarVolume v(meta);
  for (int k = 0; k < 8; ++k)
    for (int j = 0; j < 8; ++j)
      for (int i = 0; i < 8; ++i) v.voxels[meta.index(i, j, k)] = static_cast<float>(i + 10 * j + 100 * k);
  const ScalarVolume tri = resample_trilinear(v, {8, 8, 8});
  const ScalarVolume nea = resample_nearest(v, {8, 8, 8});
  CHECK(tri.voxels == v.voxels);
  CHECK(nea.voxels == v.voxels);
  CHECK(tri.meta == v.meta);
}

TEST_CASE("trilinear downsampling matches the align-centers oracle") {
  GridMeta meta{{8, 8, 8}, {1, 1, 1}, {0, 0, 0}};
  const ScalarVolume src = random_field(meta, 11);
  const ScalarVolume out = resample_trilinear(src, {4, 4, 4});
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i)
        REQUIRE(out.voxels[out.meta.index(i, j, k)] ==
                doctest::Approx(oracle_trilinear(src, {4, 4, 4}, i, j, k)).epsilon(1e-6));
}

TEST_CASE("trilinear upsampling and odd dims match the oracle") {
  GridMeta meta{{5, 4, 3}, {1, 1, 1}, {0, 0, 0}};
  const ScalarVolume src = random_field(meta, 23);
  const std::array<int, 3> dims{7, 9, 4};
  const ScalarVolume out = resample_trilinear(src, dims);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i)
        REQUIRE(out.voxels[out.meta.index(i, j, k)] ==
                doctest::Approx(oracle_trilinear(src, dims, i, j, k)).epsilon(1e-6));
}

TEST_CASE("linear ramps are reproduced exactly when samples stay interior") {
  GridMeta meta{{8, 8, 8}, {1, 1, 1}, {0, 0, 0}};
  ScalarVolume v(meta);
  for (int k = 0; k < 8; ++k)
    for (int j = 0; j < 8; ++j)
      for (int i = 0; i < 8; ++i)
        v.voxels[meta.index(i, j, k)] = static_cast<float>(2.0 + 3.0 * i - 1.0 * j + 0.5 * k);
  // 8 -> 4: source coord of output i is 2i + 0.5, interior for every output.
  const ScalarVolume out = resample_trilinear(v, {4, 4, 4});
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) {
        const double expect = 2.0 + 3.0 * (2 * i + 0.5) - (2 * j + 0.5) + 0.5 * (2 * k + 0.5);
        REQUIRE(out.voxels[out.meta.index(i, j, k)] == doctest::Approx(expect).epsilon(1e-6));
      }
}

TEST_CASE("nearest upsampling of a single voxel replicates it") {
  GridMeta meta{{1, 1, 1}, {1, 1, 1}, {0, 0, 0}};
  ScalarVolume v(meta, 7.0f);
  const ScalarVolume out = resample_nearest(v, {2, 3, 2});
  for (float x : out.voxels) CHECK(x == 7.0f);
}

TEST_CASE("nearest resampling rounds ties toward the lower index") {
  GridMeta meta{{4, 1, 1}, {1, 1, 1}, {0, 0, 0}};
  ScalarVolume v(meta);
  v.voxels = {0.0f, 1.0f, 2.0f, 3.0f};
  // 4 -> 2: source coords are 0.5 and 2.5, exactly between neighbors.
  const ScalarVolume out = resample_nearest(v, {2, 1, 1});
  CHECK(out.voxels == std::vector<float>{0.0f, 2.0f});
}

TEST_CASE("binary nearest equals direct evaluation of the rule") {
  GridMeta meta{{4, 4, 4}, {1, 1, 1}, {0, 0, 0}};
  Rng rng(99);
  BinaryVolume mask(meta);
  for (auto& m : mask.voxels) m = rng.uniform01() < 0.5 ? 1 : 0;
  const std::array<int, 3> dims{8, 8, 8};
  const BinaryVolume out = resample_nearest(mask, dims);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        const std::array<int, 3> idx{i, j, k};
        int src[3];
        for (int a = 0; a < 3; ++a) {
          const double c = (idx[a] + 0.5) * (4.0 / 8.0) - 0.5;
          int n = static_cast<int>(std::ceil(c - 0.5));
          if (n < 0) n = 0;
          if (n > 3) n = 3;
          src[a] = n;
        }
        REQUIRE(out.voxels[out.meta.index(i, j, k)] ==
                mask.voxels[meta.index(src[0], src[1], src[2])]);
      }
}

TEST_CASE("label downsampling keeps full masks full") {
  GridMeta meta{{8, 8, 8}, {1, 1, 1}, {0, 0, 0}};
  BinaryVolume mask(meta, 1);
  const BinaryVolume out = downsample_label(mask, {4, 4, 4});
  CHECK(out.foreground_count() == out.voxels.size());
}

TEST_CASE("a centered solid cube halves cleanly under label downsampling") {
  GridMeta meta{{16, 16, 16}, {1, 1, 1}, {0, 0, 0}};
  BinaryVolume mask(meta);
  for (int k = 4; k < 12; ++k)
    for (int j = 4; j < 12; ++j)
      for (int i = 4; i < 12; ++i) mask.voxels[meta.index(i, j, k)] = 1;
  const BinaryVolume out = downsample_label(mask, {8, 8, 8});
  for (int k = 0; k < 8; ++k)
    for (int j = 0; j < 8; ++j)
      for (int i = 0; i < 8; ++i) {
        const bool in = i >= 2 && i < 6 && j >= 2 && j < 6 && k >= 2 && k < 6;
        REQUIRE(out.voxels[out.meta.index(i, j, k)] == (in ? 1 : 0));
      }
}

TEST_CASE("an exact 0.5 interpolant thresholds to background") {
  GridMeta meta{{2, 2, 2}, {1, 1, 1}, {0, 0, 0}};
  BinaryVolume mask(meta);
  // Checkerboard: the center of the cell interpolates to exactly 0.5.
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) mask.voxels[meta.index(i, j, k)] = (i + j + k) % 2;
  const BinaryVolume out = downsample_label(mask, {1, 1, 1});
  CHECK(out.voxels[0] == 0);
}

TEST_CASE("downsample then upsample preserves constants") {
  GridMeta meta{{8, 8, 8}, {1, 1, 1}, {0, 0, 0}};
  ScalarVolume v(meta, -1.5f);
  const ScalarVolume down = resample_trilinear(v, {4, 4, 4});
  const ScalarVolume up = resample_trilinear(down, {8, 8, 8});
  REQUIRE(up.meta.dims == meta.dims);
  for (float x : up.voxels) REQUIRE(x == -1.5f);
  CHECK(up.meta.spacing == meta.spacing);
  CHECK(up.meta.origin == meta.origin);
}

TEST_CASE("resampled metadata keeps world sample positions") {
  GridMeta meta{{8, 8, 8}, {1.0, 2.0, 0.5}, {10.0, -3.0, 0.0}};
  ScalarVolume v(meta, 0.0f);
  const ScalarVolume out = resample_trilinear(v, {4, 4, 4});
  CHECK(out.meta.spacing == std::array<double, 3>{2.0, 4.0, 1.0});
  // Origin shifts so output voxel center 0 sits at source coordinate 0.5.
  CHECK(out.meta.origin[0] == doctest::Approx(10.0 + 1.0 * 0.5).epsilon(1e-12));
  CHECK(out.meta.origin[1] == doctest::Approx(-3.0 + 2.0 * 0.5).epsilon(1e-12));
  CHECK(out.meta.origin[2] == doctest::Approx(0.0 + 0.5 * 0.5).epsilon(1e-12));
  // World position of output center (i) equals that of source coord 2i+0.5.
  for (int i = 0; i < 4; ++i) {
    const Vec3 w = out.meta.voxel_center(i, i, i);
    CHECK(w.x == doctest::Approx(10.0 + (2 * i + 0.5) * 1.0).epsilon(1e-12));
    CHECK(w.y == doctest::Approx(-3.0 + (2 * i + 0.5) * 2.0).epsilon(1e-12));
    CHECK(w.z == doctest::Approx(0.0 + (2 * i + 0.5) * 0.5).epsilon(1e-12));
  }
  CHECK_THROWS_AS(resample_trilinear(v, {0, 4, 4}), std::invalid_argument);
}
