#pragma once

// Landing site detection: distance transform peaks refined by mean shift and
// ranked by the OMG fit of their landing areas.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "omgmap/omg.hpp"
#include "omgmap/pyramid.hpp"
#include "omgmap/raster.hpp"
#include "omgmap/segmentation.hpp"

namespace omgmap {

struct DetectConfig {
  int max_peaks = 5;
  int shift_iterations = 5;
  double weight_roughness = 100.0;
  double weight_distance = 10.0;
  double weight_uncertainty = 100.0;
  double peak_factor = 0.5;
  double landing_radius = 0.5;  // meters; Ω and NMS footprint
  double min_distance = 0.5;    // meters; candidates below this clearance are rejected

  void validate() const {
    if (max_peaks < 1) throw ConfigError("max_peaks must be >= 1");
    if (shift_iterations < 0) throw ConfigError("shift_iterations must be >= 0");
    if (weight_roughness < 0 || weight_distance < 0 || weight_uncertainty < 0)
      throw ConfigError("kernel weights must be non-negative");
    if (!(peak_factor > 0.0 && peak_factor <= 1.0)) throw ConfigError("peak_factor must be in (0, 1]");
    if (!(landing_radius > 0.0)) throw ConfigError("landing_radius must be positive");
    if (!(min_distance >= 0.0)) throw ConfigError("min_distance must be non-negative");
  }
};

/// Continuous position in finest-layer cell units: cell (row, col) has its
/// center at (x = col, y = row).
struct GridPoint {
  double x = 0.0;
  double y = 0.0;
};

struct LandingCandidate {
  int peak_row = 0;
  int peak_col = 0;
  GridPoint shifted;
  double clearance = 0.0;  // meters
  bool degenerate = false;
  CellState area_fit;
};

struct FeatureVector {
  double roughness = 0.0;
  double inv_distance = 0.0;
  double uncertainty = 0.0;
};

/// Two-pass 3-4 chamfer distance to the nearest non-safe cell, in meters.
/// Cells outside the raster count as hazards.
inline Raster<float> distance_transform(const Raster<std::uint8_t>& mask, double resolution) {
  const int w = mask.width();
  const int h = mask.height();
  constexpr std::int32_t kInf = std::numeric_limits<std::int32_t>::max() / 2;
  Raster<std::int32_t> d(w, h, 0);
  for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] = mask.data()[i] == kSafe ? kInf : 0;
  auto at = [&](int r, int c) -> std::int32_t { return d.contains(r, c) ? d(r, c) : 0; };
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      std::int32_t v = d(r, c);
      if (v == 0) continue;
      v = std::min({v, at(r - 1, c - 1) + 4, at(r - 1, c) + 3, at(r - 1, c + 1) + 4, at(r, c - 1) + 3});
      d(r, c) = v;
    }
  for (int r = h - 1; r >= 0; --r)
    for (int c = w - 1; c >= 0; --c) {
      std::int32_t v = d(r, c);
      if (v == 0) continue;
      v = std::min({v, at(r + 1, c + 1) + 4, at(r + 1, c) + 3, at(r + 1, c - 1) + 4, at(r, c + 1) + 3});
      d(r, c) = v;
    }
  Raster<float> out(w, h, 0.0f);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = static_cast<float>(d.data()[i] * resolution / 3.0);
  return out;
}

/// Local maxima of the distance raster under a square NMS window. A cell is
/// a peak when no window cell is larger and no equal cell precedes it in
/// row-major order. Peaks below peak_factor * global max are discarded; the
/// rest are sorted by clearance (row-major on ties) and truncated.
inline std::vector<LandingCandidate> detect_peaks(const Raster<float>& distance, double resolution,
                                                  const DetectConfig& cfg) {
  std::vector<LandingCandidate> peaks;
  float global = 0.0f;
  for (float v : distance.data()) global = std::max(global, v);
  if (!(global > 0.0f)) return peaks;
  const int half = radius_in_cells(cfg.landing_radius, resolution);
  const double floor = cfg.peak_factor * global;
  for (int r = 0; r < distance.height(); ++r)
    for (int c = 0; c < distance.width(); ++c) {
      const float v = distance(r, c);
      if (!(v > 0.0f) || v < floor) continue;
      bool is_peak = true;
      for (int rr = std::max(0, r - half); rr <= std::min(distance.height() - 1, r + half) && is_peak; ++rr)
        for (int cc = std::max(0, c - half); cc <= std::min(distance.width() - 1, c + half); ++cc) {
          const float u = distance(rr, cc);
          const bool before = rr < r || (rr == r && cc < c);
          if (u > v || (u == v && before)) {
            is_peak = false;
            break;
          }
        }
      if (!is_peak) continue;
      LandingCandidate p;
      p.peak_row = r;
      p.peak_col = c;
      p.shifted = {static_cast<double>(c), static_cast<double>(r)};
      p.clearance = v;
      peaks.push_back(p);
    }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const LandingCandidate& a, const LandingCandidate& b) { return a.clearance > b.clearance; });
  if (peaks.size() > static_cast<std::size_t>(cfg.max_peaks)) peaks.resize(static_cast<std::size_t>(cfg.max_peaks));
  return peaks;
}

/// Inputs of the mean-shift kernel, all at the finest resolution.
struct FeatureMaps {
  Raster<float> roughness;      // meters, NaN undefined
  Raster<float> distance;       // meters
  Raster<float> uncertainty;    // m², NaN undefined
  float max_distance = 0.0f;

  [[nodiscard]] std::optional<FeatureVector> at(int row, int col) const {
    const float r = roughness(row, col);
    const float u = uncertainty(row, col);
    if (std::isnan(r) || std::isnan(u) || !(max_distance > 0.0f)) return std::nullopt;
    return FeatureVector{r, 1.0 - static_cast<double>(distance(row, col)) / max_distance, u};
  }
};

/// Finest roughness, with cells the cascade skipped taking the value of the
/// nearest coarser layer that evaluated them.
inline Raster<float> roughness_feature(const SafetyMaps& maps) {
  Raster<float> out = maps.roughness.front();
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c) {
      if (!std::isnan(out(r, c))) continue;
      for (std::size_t l = 1; l < maps.roughness.size(); ++l) {
        const auto& coarse = maps.roughness[l];
        const int rr = r >> l;
        const int cc = c >> l;
        if (coarse.contains(rr, cc) && !std::isnan(coarse(rr, cc))) {
          out(r, c) = coarse(rr, cc);
          break;
        }
      }
    }
  return out;
}

inline FeatureMaps make_features(const SafetyMaps& maps, const Raster<float>& distance) {
  FeatureMaps f{roughness_feature(maps), distance, maps.uncertainty, 0.0f};
  for (float v : distance.data()) f.max_distance = std::max(f.max_distance, v);
  return f;
}

/// Gaussian kernel exp(-φᵀΛφ) with diagonal Λ.
inline double kernel_weight(const FeatureVector& phi, const DetectConfig& cfg) noexcept {
  return std::exp(-(cfg.weight_roughness * phi.roughness * phi.roughness +
                    cfg.weight_distance * phi.inv_distance * phi.inv_distance +
                    cfg.weight_uncertainty * phi.uncertainty * phi.uncertainty));
}

namespace detail {

// Squared disk radius with slack, so cells exactly on the circle stay in Ω
// when the center carries round-off.
inline double disk_reach2(double radius) noexcept { return radius * radius * (1.0 + 1e-9) + 1e-9; }

}  // namespace detail

struct MeanShiftResult {
  GridPoint location;
  bool degenerate = false;
  std::vector<GridPoint> trace;  // start plus one point per completed iteration
};

/// Fixed-iteration mean shift. Ω is every finest cell whose center lies
/// within the landing radius of the current location; cells with undefined
/// features are skipped. The location is clamped to the raster.
inline MeanShiftResult mean_shift(GridPoint start, const FeatureMaps& features, double resolution,
                                  const DetectConfig& cfg) {
  MeanShiftResult out{start, false, {start}};
  const double radius = cfg.landing_radius / resolution;
  const double reach2 = detail::disk_reach2(radius);
  const int w = features.roughness.width();
  const int h = features.roughness.height();
  GridPoint u = start;
  for (int it = 0; it < cfg.shift_iterations; ++it) {
    double sw = 0.0, sx = 0.0, sy = 0.0;
    const int r0 = std::max(0, static_cast<int>(std::floor(u.y - radius)));
    const int r1 = std::min(h - 1, static_cast<int>(std::ceil(u.y + radius)));
    const int c0 = std::max(0, static_cast<int>(std::floor(u.x - radius)));
    const int c1 = std::min(w - 1, static_cast<int>(std::ceil(u.x + radius)));
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) {
        const double dx = c - u.x;
        const double dy = r - u.y;
        if (dx * dx + dy * dy > reach2) continue;
        const auto phi = features.at(r, c);
        if (!phi) continue;
        const double k = kernel_weight(*phi, cfg);
        sw += k;
        sx += k * c;
        sy += k * r;
      }
    if (!(sw > 0.0)) {
      if (it == 0) out.degenerate = true;
      break;
    }
    u.x = std::clamp(sx / sw, 0.0, static_cast<double>(w - 1));
    u.y = std::clamp(sy / sw, 0.0, static_cast<double>(h - 1));
    out.trace.push_back(u);
  }
  out.location = u;
  return out;
}

inline int nearest_cell(double v) noexcept { return static_cast<int>(std::floor(v + 0.5)); }

/// OMG fit of the landing area: fusion of the pooled finest-layer states of
/// all cells within the landing radius of `center`.
inline CellState landing_area_fit(const PyramidMap& pooled, GridPoint center, double landing_radius) {
  const double radius = landing_radius / pooled.resolution(0);
  const double reach2 = detail::disk_reach2(radius);
  const int n = pooled.side(0);
  CellState acc;
  const int r0 = std::max(0, static_cast<int>(std::floor(center.y - radius)));
  const int r1 = std::min(n - 1, static_cast<int>(std::ceil(center.y + radius)));
  const int c0 = std::max(0, static_cast<int>(std::floor(center.x - radius)));
  const int c1 = std::min(n - 1, static_cast<int>(std::ceil(center.x + radius)));
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      const double dx = c - center.x;
      const double dy = r - center.y;
      if (dx * dx + dy * dy > reach2) continue;
      acc = fuse_states(acc, pooled.cell(0, r, c));
    }
  return acc;
}

struct Selection {
  std::vector<LandingCandidate> candidates;
  std::optional<std::size_t> selected;  // nullopt = reject
};

/// Picks the candidate with the smallest landing-area OMG variance among
/// those with enough clearance and a non-degenerate shift.
inline Selection select_site(std::vector<LandingCandidate> candidates, const PyramidMap& pooled,
                             const DetectConfig& cfg) {
  Selection out;
  for (auto& cand : candidates) cand.area_fit = landing_area_fit(pooled, cand.shifted, cfg.landing_radius);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& cand = candidates[i];
    if (cand.degenerate || cand.clearance < cfg.min_distance || cand.area_fit.empty()) continue;
    if (cand.area_fit.variance < best) {
      best = cand.area_fit.variance;
      out.selected = i;
    }
  }
  out.candidates = std::move(candidates);
  return out;
}

struct Detection {
  Raster<float> distance;
  Selection selection;
  std::optional<std::pair<int, int>> dt_max_cell;  // plain distance-transform maximum
};

/// Full detection on one segmented frame.
inline Detection detect(const SafetyMaps& maps, const PyramidMap& pooled, const DetectConfig& cfg) {
  Detection out;
  out.distance = distance_transform(maps.landing_mask, maps.resolution);
  float best = 0.0f;
  for (int r = 0; r < out.distance.height(); ++r)
    for (int c = 0; c < out.distance.width(); ++c)
      if (out.distance(r, c) > best) {
        best = out.distance(r, c);
        out.dt_max_cell = std::make_pair(r, c);
      }
  auto peaks = detect_peaks(out.distance, maps.resolution, cfg);
  if (!peaks.empty()) {
    const FeatureMaps features = make_features(maps, out.distance);
    for (auto& p : peaks) {
      const auto ms = mean_shift(p.shifted, features, maps.resolution, cfg);
      p.shifted = ms.location;
      p.degenerate = ms.degenerate;
    }
  }
  out.selection = select_site(std::move(peaks), pooled, cfg);
  return out;
}

inline const char* detection_report_header() {
  return "frame,index,peak_row,peak_col,clearance_m,shifted_x_m,shifted_y_m,area_variance_m2,status";
}

/// One CSV line per candidate plus a summary line whose status is the
/// selected index or REJECT.
inline void write_detection_report(std::ostream& os, long frame_id, const Selection& sel, const SafetyMaps& maps,
                                   double min_distance) {
  auto fmt = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < sel.candidates.size(); ++i) {
    const auto& c = sel.candidates[i];
    const char* status = "candidate";
    if (sel.selected && *sel.selected == i) status = "selected";
    else if (c.degenerate) status = "degenerate";
    else if (c.clearance < min_distance) status = "low_clearance";
    os << frame_id << ',' << i << ',' << c.peak_row << ',' << c.peak_col << ',' << fmt(c.clearance) << ','
       << fmt(maps.origin_x + (c.shifted.x + 0.5) * maps.resolution) << ','
       << fmt(maps.origin_y + (c.shifted.y + 0.5) * maps.resolution) << ','
       << (c.area_fit.empty() ? std::string("nan") : fmt(c.area_fit.variance)) << ',' << status << '\n';
  }
  os << frame_id << ",summary,,,,,,," << (sel.selected ? std::to_string(*sel.selected) : std::string("REJECT"))
     << '\n';
}

/// Plain distance-transform maximum of the frame, for comparison.
inline void write_dt_max_line(std::ostream& os, long frame_id, const Detection& det, const SafetyMaps& maps) {
  if (!det.dt_max_cell) {
    os << frame_id << ",dt_max,,,,,,,none\n";
    return;
  }
  const auto [r, c] = *det.dt_max_cell;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%ld,dt_max,%d,%d,%.6f,%.6f,%.6f,,dt_max\n", frame_id, r, c,
                static_cast<double>(det.distance(r, c)), maps.origin_x + (c + 0.5) * maps.resolution,
                maps.origin_y + (r + 0.5) * maps.resolution);
  os << buf;
}

}  // namespace omgmap
