#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "omgmap/roughness.hpp"

using namespace omgmap;

namespace {

Raster<float> random_raster(std::mt19937_64& rng, int w, int h, double hole_fraction = 0.0) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  Raster<float> r(w, h);
  for (auto& v : r.data()) v = p(rng) < hole_fraction ? kNaN : u(rng);
  return r;
}

Raster<float> smooth_raster(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> ph(0.0, 6.28);
  const double a = ph(rng), b = ph(rng);
  Raster<float> r(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) r(y, x) = static_cast<float>(std::sin(0.03 * x + a) + std::cos(0.021 * y + b));
  return r;
}

// Independent brute force over the bounding square with the circle test.
Raster<float> oracle_roughness(const Raster<float>& h, int radius) {
  Raster<float> out(h.width(), h.height(), kNaN);
  for (int r = 0; r < h.height(); ++r)
    for (int c = 0; c < h.width(); ++c) {
      float hi = -INFINITY, lo = INFINITY;
      bool ok = true;
      for (int dy = -radius; dy <= radius && ok; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > radius * radius) continue;
          if (!h.contains(r + dy, c + dx) || std::isnan(h(r + dy, c + dx))) {
            ok = false;
            break;
          }
          hi = std::max(hi, h(r + dy, c + dx));
          lo = std::min(lo, h(r + dy, c + dx));
        }
      if (ok) out(r, c) = hi - lo;
    }
  return out;
}

bool bit_equal(const Raster<float>& a, const Raster<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST(Disk, AreaAndMembership) {
  const Disk d(2);
  EXPECT_EQ(d.area(), 13u);
  EXPECT_TRUE(d.contains(2, 0));
  EXPECT_FALSE(d.contains(2, 1));
  EXPECT_TRUE(d.contains(1, 1));
  EXPECT_EQ(Disk(0).area(), 1u);
  EXPECT_EQ(radius_in_cells(0.5, 0.05), 10);
  EXPECT_EQ(radius_in_cells(0.5, 0.2), 3);
}

TEST(Roughness, NaiveMatchesOracle) {
  std::mt19937_64 rng(1);
  const auto h = random_raster(rng, 64, 64, 0.002);
  const auto a = compute_roughness_naive(h, 10);
  EXPECT_TRUE(bit_equal(a, oracle_roughness(h, 10)));
}

TEST(Roughness, ConstantIsZeroAndRollingReadsLess) {
  Raster<float> h(40, 30, 2.0f);
  ReadCounter naive, rolling;
  const auto a = compute_roughness_naive(h, 4, &naive);
  const auto b = compute_roughness_rolling(h, 4, &rolling);
  EXPECT_TRUE(bit_equal(a, b));
  EXPECT_EQ(a(15, 20), 0.0f);
  EXPECT_TRUE(std::isnan(a(0, 0)));
  EXPECT_LT(rolling.cell_reads, naive.cell_reads);
}

TEST(Roughness, SpikeSeenByEveryCoveringDisk) {
  Raster<float> h(21, 21, 0.0f);
  h(10, 10) = 0.3f;
  const auto r = compute_roughness_rolling(h, 3);
  const Disk d(3);
  for (int y = 3; y < 18; ++y)
    for (int x = 3; x < 18; ++x) EXPECT_EQ(r(y, x), d.contains(10 - y, 10 - x) ? 0.3f : 0.0f) << y << ',' << x;
}

TEST(Roughness, RollingBitEqualOnRandomInputs) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 30; ++t) {
    std::uniform_int_distribution<int> size(5, 70), rad(1, 12);
    const int w = size(rng), hgt = size(rng), radius = rad(rng);
    const auto h = random_raster(rng, w, hgt, t % 3 == 0 ? 0.01 : 0.0);
    ReadCounter n, r;
    const auto a = compute_roughness_naive(h, radius, &n);
    const auto b = compute_roughness_rolling(h, radius, &r);
    ASSERT_TRUE(bit_equal(a, b)) << "trial " << t;
    EXPECT_LE(r.cell_reads, n.cell_reads);
  }
}

TEST(Roughness, RollingRespectsActiveMask) {
  std::mt19937_64 rng(4);
  const auto h = smooth_raster(rng, 50, 40);
  ActiveMask active(50, 40, 1);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  for (auto& v : active.data()) v = p(rng) < 0.7 ? 1 : 0;
  const auto a = compute_roughness_naive(h, 5, nullptr, &active);
  const auto b = compute_roughness_rolling(h, 5, nullptr, &active);
  EXPECT_TRUE(bit_equal(a, b));
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!active.data()[i]) {
      EXPECT_TRUE(std::isnan(b.data()[i]));
    }
}

TEST(Roughness, SmoothRastersReadFewer) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 5; ++t) {
    const auto h = smooth_raster(rng, 96, 96);
    ReadCounter n, r;
    const auto a = compute_roughness_naive(h, 8, &n);
    const auto b = compute_roughness_rolling(h, 8, &r);
    ASSERT_TRUE(bit_equal(a, b));
    EXPECT_LT(r.cell_reads, n.cell_reads);
  }
}

TEST(Roughness, TinyRasterFallsBackToFullSearch) {
  std::mt19937_64 rng(6);
  const auto h = random_raster(rng, 6, 6);
  ReadCounter n, r;
  const auto a = compute_roughness_naive(h, 8, &n);
  const auto b = compute_roughness_rolling(h, 8, &r);
  EXPECT_TRUE(bit_equal(a, b));
  EXPECT_LE(r.cell_reads, n.cell_reads);
}

TEST(Roughness, AdversarialExtremaAlwaysLeave) {
  // Extremes at the trailing edge leave the window on every step.
  Raster<float> h(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) h(y, x) = static_cast<float>(((x + y) % 2 ? 1 : -1) * (100 - x - y));
  ReadCounter n, r;
  const auto a = compute_roughness_naive(h, 6, &n);
  const auto b = compute_roughness_rolling(h, 6, &r);
  EXPECT_TRUE(bit_equal(a, b));
  EXPECT_LE(r.cell_reads, n.cell_reads);
}

TEST(DiskMaxDefined, IgnoresNaN) {
  Raster<float> v(5, 5, kNaN);
  v(2, 2) = 1.0f;
  v(0, 0) = 5.0f;
  const auto m = disk_max_defined(v, 1);
  EXPECT_EQ(m(2, 1), 1.0f);
  EXPECT_EQ(m(1, 0), 5.0f);
  EXPECT_TRUE(std::isnan(m(4, 4)));
}
