#pragma once

// Coarse-to-fine landing hazard segmentation over a pooled pyramid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "omgmap/pyramid.hpp"
#include "omgmap/raster.hpp"
#include "omgmap/roughness.hpp"

namespace omgmap {

struct SegConfig {
  double roughness_threshold = 0.1;      // meters
  double landing_radius = 0.5;           // meters
  double roughness_search_radius = 0.5;  // meters
  double slope_threshold = 10.0;         // degrees
  bool use_rolling = true;

  void validate() const {
    if (!(roughness_threshold > 0.0)) throw ConfigError("roughness_threshold must be positive");
    if (!(landing_radius > 0.0)) throw ConfigError("landing_radius must be positive");
    if (!(roughness_search_radius > 0.0)) throw ConfigError("roughness_search_radius must be positive");
    if (!(slope_threshold > 0.0)) throw ConfigError("slope_threshold must be positive");
  }
};

enum MaskValue : std::uint8_t { kHazard = 0, kSafe = 1 };

struct SafetyMaps {
  double resolution = 0.0;  // finest layer, m/cell
  double origin_x = 0.0;
  double origin_y = 0.0;
  Raster<std::uint8_t> landing_mask;   // finest layer, kSafe / kHazard
  std::vector<Raster<float>> roughness;  // per layer, NaN where not evaluated
  Raster<float> slope;                 // top layer, degrees, NaN undefined
  Raster<float> uncertainty;           // finest layer OMG variance, NaN empty
  ReadCounter roughness_reads;

  [[nodiscard]] std::size_t safe_cells() const noexcept {
    std::size_t n = 0;
    for (auto v : landing_mask.data()) n += v == kSafe ? 1 : 0;
    return n;
  }
};

namespace detail {

// Solves the 3x3 system a x = b by Cramer's rule; false when singular.
inline bool solve3(const double a[3][3], const double b[3], double x[3]) {
  auto det3 = [](const double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  const double d = det3(a);
  double scale = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) scale = std::max(scale, std::abs(a[i][j]));
  if (!(std::abs(d) > 1e-12 * scale * scale * scale)) return false;
  for (int k = 0; k < 3; ++k) {
    double m[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m[i][j] = j == k ? b[i] : a[i][j];
    x[k] = det3(m) / d;
  }
  return true;
}

}  // namespace detail

/// Least-squares plane slope (degrees) over the non-empty cells of a disk of
/// `radius_cells` around each cell. NaN when the fit is rank deficient.
inline Raster<float> plane_fit_slope(const Raster<float>& heights, double resolution, int radius_cells) {
  const Disk disk(radius_cells);
  Raster<float> out(heights.width(), heights.height(), kNaN);
  for (int r = 0; r < heights.height(); ++r)
    for (int c = 0; c < heights.width(); ++c) {
      // Offsets relative to the center keep the normal equations well scaled.
      double sxx = 0, sxy = 0, syy = 0, sx = 0, sy = 0, n = 0, sxz = 0, syz = 0, sz = 0;
      for (const auto& s : disk.spans()) {
        const int rr = r + s.dy;
        for (int cc = c + s.col_begin; cc <= c + s.col_end; ++cc) {
          if (!heights.contains(rr, cc)) continue;
          const float z = heights(rr, cc);
          if (std::isnan(z)) continue;
          const double x = (cc - c) * resolution;
          const double y = (rr - r) * resolution;
          sxx += x * x, sxy += x * y, syy += y * y, sx += x, sy += y, n += 1;
          sxz += x * z, syz += y * z, sz += z;
        }
      }
      if (n < 3) continue;
      const double a[3][3] = {{sxx, sxy, sx}, {sxy, syy, sy}, {sx, sy, n}};
      const double b[3] = {sxz, syz, sz};
      double p[3];
      if (!detail::solve3(a, b, p)) continue;
      const double gradient = std::hypot(p[0], p[1]);
      out(r, c) = static_cast<float>(std::atan(gradient) * 180.0 / std::numbers::pi);
    }
  return out;
}

inline Raster<float> compute_slope_top(const PyramidMap& pooled, const SegConfig& cfg) {
  const int top = pooled.num_layers() - 1;
  const double res = pooled.resolution(top);
  return plane_fit_slope(layer_raster(pooled, top, Channel::kMean), res, radius_in_cells(cfg.landing_radius, res));
}

/// Cascade segmentation.
///
/// Top layer: a cell fails when its slope is undefined or above threshold, or
/// when any defined roughness within the landing radius reaches the
/// threshold. Intermediate layers repeat the roughness test only below cells
/// that did not fail. A coarse cell whose roughness is undefined (partially
/// observed) does not fail; its children are re-checked. At the finest layer
/// a cell is safe iff it was not excluded above and the maximum roughness
/// within the landing radius is defined and below the threshold.
inline SafetyMaps segment(const PyramidMap& pooled, const SegConfig& cfg) {
  const int n_layers = pooled.num_layers();
  const int top = n_layers - 1;
  SafetyMaps out;
  out.resolution = pooled.resolution(0);
  out.origin_x = pooled.origin_x();
  out.origin_y = pooled.origin_y();
  out.roughness.resize(static_cast<std::size_t>(n_layers));
  out.slope = compute_slope_top(pooled, cfg);
  out.uncertainty = layer_raster(pooled, 0, Channel::kVariance);

  auto roughness = [&](const Raster<float>& h, int radius, const ActiveMask* active) {
    return cfg.use_rolling ? compute_roughness_rolling(h, radius, &out.roughness_reads, active)
                           : compute_roughness_naive(h, radius, &out.roughness_reads, active);
  };

  // failed(l) marks cells excluded at layer l or above.
  ActiveMask failed_above;
  for (int l = top; l >= 0; --l) {
    const double res = pooled.resolution(l);
    const int n = pooled.side(l);
    ActiveMask active(n, n, 1);
    if (l < top) {
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) active(r, c) = failed_above(r >> 1, c >> 1) ? 0 : 1;
    }
    const Raster<float> heights = layer_raster(pooled, l, Channel::kMean);
    Raster<float>& rough = out.roughness[static_cast<std::size_t>(l)];
    rough = roughness(heights, radius_in_cells(cfg.roughness_search_radius, res), &active);
    const int landing = radius_in_cells(cfg.landing_radius, res);

    if (l > 0) {
      const Raster<float> worst = disk_max_defined(rough, landing);
      ActiveMask failed(n, n, 0);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
          bool fail = !active(r, c);
          if (!fail && !std::isnan(worst(r, c)) && worst(r, c) >= cfg.roughness_threshold) fail = true;
          if (!fail && l == top) {
            const float s = out.slope(r, c);
            fail = std::isnan(s) || s > cfg.slope_threshold;
          }
          failed(r, c) = fail ? 1 : 0;
        }
      failed_above = std::move(failed);
    } else {
      const Raster<float> worst = disk_extrema_rolling(rough, landing).max;
      out.landing_mask = Raster<std::uint8_t>(n, n, kHazard);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
          const float w = worst(r, c);
          bool safe = active(r, c) && !std::isnan(w) && w < cfg.roughness_threshold;
          if (safe && l == top) safe = !std::isnan(out.slope(r, c)) && out.slope(r, c) <= cfg.slope_threshold;
          if (safe) out.landing_mask(r, c) = kSafe;
        }
    }
  }
  return out;
}

/// Same decision rule as the cascade's finest layer, applied without any
/// coarse pre-filtering. Used to check that the cascade only adds caution.
inline Raster<std::uint8_t> segment_finest_only(const PyramidMap& pooled, const SegConfig& cfg) {
  const double res = pooled.resolution(0);
  const Raster<float> heights = layer_raster(pooled, 0, Channel::kMean);
  const Raster<float> rough =
      compute_roughness_rolling(heights, radius_in_cells(cfg.roughness_search_radius, res));
  const Raster<float> worst = disk_extrema_rolling(rough, radius_in_cells(cfg.landing_radius, res)).max;
  Raster<std::uint8_t> mask(heights.width(), heights.height(), kHazard);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const float w = worst.data()[i];
    if (!std::isnan(w) && w < cfg.roughness_threshold) mask.data()[i] = kSafe;
  }
  return mask;
}

}  // namespace omgmap
