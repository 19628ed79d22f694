#pragma once

// Evaluation harnesses: DEM error against ground truth, landing failures
// against rock masks, update-scheme and segmentation benchmarks, and the
// OMG versus Kalman comparison.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "omgmap/omg.hpp"
#include "omgmap/pipeline.hpp"
#include "omgmap/pyramid.hpp"
#include "omgmap/raster.hpp"
#include "omgmap/roughness.hpp"
#include "omgmap/synth.hpp"

namespace omgmap {

// ---------------------------------------------------------------------------
// DEM error

struct RmseResult {
  double rmse = std::numeric_limits<double>::quiet_NaN();  // NaN when nothing overlaps
  std::size_t overlap = 0;
  std::size_t empty_estimate = 0;  // truth defined, estimate empty

  [[nodiscard]] bool defined() const noexcept { return overlap > 0; }
};

/// RMSE over cells defined in both rasters.
inline RmseResult eval_rmse(const Raster<float>& estimate, const Raster<float>& truth) {
  if (estimate.width() != truth.width() || estimate.height() != truth.height())
    throw std::invalid_argument("eval_rmse: rasters are not aligned");
  RmseResult out;
  double sum = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const float e = estimate.data()[i];
    const float t = truth.data()[i];
    if (std::isnan(t)) continue;
    if (std::isnan(e)) {
      ++out.empty_estimate;
      continue;
    }
    const double d = static_cast<double>(e) - static_cast<double>(t);
    sum += d * d;
    ++out.overlap;
  }
  if (out.overlap > 0) out.rmse = std::sqrt(sum / static_cast<double>(out.overlap));
  return out;
}

/// Ground truth sampled at the finest-layer cell centers of `map`.
inline Raster<float> truth_for_map(const Terrain& terrain, const PyramidMap& map) {
  return terrain.height_raster(map.origin_x(), map.origin_y(), map.resolution(0), map.side(0), map.side(0));
}

/// Nearest-cell lookup of a world-aligned raster; NaN outside.
inline float sample_raster(const Raster<float>& r, const RasterHeader& h, double x, double y) {
  const auto col = static_cast<long long>(std::floor((x - h.origin_x) / h.resolution));
  const auto row = static_cast<long long>(std::floor((y - h.origin_y) / h.resolution));
  if (col < 0 || row < 0 || col >= r.width() || row >= r.height()) return kNaN;
  return r(static_cast<int>(row), static_cast<int>(col));
}

/// No-fusion baseline: every measurement overwrites its finest cell.
class OverwriteMap {
 public:
  explicit OverwriteMap(const PyramidConfig& cfg) : cfg_(cfg) {}

  void integrate(const Frame& frame) {
    if (!grid_) {
      grid_.emplace(cfg_, frame.pose.x, frame.pose.y);
    } else {
      shift_map(*grid_, frame.pose.x, frame.pose.y);
    }
    for (const auto& m : frame.points) {
      if (!detail::valid_measurement(m)) continue;
      if (const auto idx = grid_->locate(0, m.world_x, m.world_y)) grid_->cell(*idx) = {m.height, m.variance, 1.0 / m.variance, 1};
    }
  }

  [[nodiscard]] Raster<float> heights() const { return layer_raster(*grid_, 0, Channel::kMean); }
  [[nodiscard]] const PyramidMap& map() const { return *grid_; }

 private:
  PyramidConfig cfg_;
  std::optional<PyramidMap> grid_;
};

// ---------------------------------------------------------------------------
// Landing failures

enum class SiteMethod { kDtMax, kShiftedPeaks };

struct SiteOutcome {
  bool selected = false;
  double x = 0.0;
  double y = 0.0;
  bool on_rock = false;
  bool near_rock = false;  // within the landing radius of a rock
};

inline SiteOutcome classify_site(const Terrain& terrain, bool selected, double x, double y, double margin) {
  SiteOutcome o{selected, x, y, false, false};
  if (!selected) return o;
  o.on_rock = terrain.on_rock(x, y);
  o.near_rock = terrain.distance_to_rock(x, y, margin + 1.0) <= margin;
  return o;
}

/// World position of the selected site of each method for one frame.
inline SiteOutcome frame_site(const Terrain& terrain, const FrameResult& r, SiteMethod method, double margin) {
  const double res = r.maps.resolution;
  if (method == SiteMethod::kDtMax) {
    const auto& cell = r.detection.dt_max_cell;
    if (!cell) return {};
    return classify_site(terrain, true, r.maps.origin_x + (cell->second + 0.5) * res,
                         r.maps.origin_y + (cell->first + 0.5) * res, margin);
  }
  const auto& sel = r.detection.selection;
  if (!sel.selected) return {};
  const auto& c = sel.candidates[*sel.selected];
  // The selected finest cell is the one containing the shifted location.
  return classify_site(terrain, true, r.maps.origin_x + (nearest_cell(c.shifted.x) + 0.5) * res,
                       r.maps.origin_y + (nearest_cell(c.shifted.y) + 0.5) * res, margin);
}

struct FailureCounts {
  double resolution = 0.0;
  int frames = 0;
  int dt_selected = 0;
  int dt_failures = 0;
  int dt_near = 0;
  int shifted_selected = 0;
  int shifted_failures = 0;
  int shifted_near = 0;
};

/// Renders the flight once and runs the pipeline at each base resolution.
inline std::vector<FailureCounts> eval_landing_failures(const Terrain& terrain, const TrajectorySpec& traj,
                                                        PipelineConfig cfg, const std::vector<double>& resolutions) {
  std::vector<Frame> frames;
  for (int i = 0; i < traj.frame_count; ++i) frames.push_back(render_pointcloud(terrain, traj, i));
  std::vector<FailureCounts> out;
  for (double res : resolutions) {
    cfg.pyramid.base_resolution = res;
    FailureCounts fc;
    fc.resolution = res;
    std::size_t next = 0;
    run_pipeline(
        cfg, [&]() -> std::optional<Frame> { return next < frames.size() ? std::optional(frames[next++]) : std::nullopt; },
        [&](const FrameResult& r) {
          ++fc.frames;
          const auto dt = frame_site(terrain, r, SiteMethod::kDtMax, cfg.seg.landing_radius);
          const auto sp = frame_site(terrain, r, SiteMethod::kShiftedPeaks, cfg.seg.landing_radius);
          fc.dt_selected += dt.selected;
          fc.dt_failures += dt.on_rock;
          fc.dt_near += dt.near_rock;
          fc.shifted_selected += sp.selected;
          fc.shifted_failures += sp.on_rock;
          fc.shifted_near += sp.near_rock;
        });
    out.push_back(fc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Update-scheme benchmark

struct UpdateBench {
  std::uint64_t measurements = 0;
  std::uint64_t direct_writes = 0;        // cells written by the direct scheme
  std::uint64_t direct_chain_writes = 0;  // covering cell per layer: N per measurement
  std::uint64_t indirect_updates = 0;     // single-layer writes
  std::uint64_t pool_fusions = 0;
  double direct_ms = 0.0;
  double indirect_ms = 0.0;
  double max_relative_difference = 0.0;
  bool equivalent = false;

  [[nodiscard]] std::uint64_t indirect_total() const noexcept { return indirect_updates + pool_fusions; }
};

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

/// Feeds the same stream to both schemes and checks the pooling contract
/// before reporting counts and times.
inline UpdateBench bench_updates(const std::vector<Measurement>& stream, const PyramidConfig& cfg,
                                 const CameraModel& camera, double center_x = 0.0, double center_y = 0.0,
                                 double tolerance = 1e-6) {
  UpdateBench b;
  auto t0 = std::chrono::steady_clock::now();
  DirectPyramid direct(cfg, center_x, center_y);
  for (const auto& m : stream) direct.update(m, camera);
  b.direct_ms = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  PyramidMap single(cfg, center_x, center_y);
  for (const auto& m : stream) update_single_layer(single, m, camera);
  PoolStats st;
  const PyramidMap pooled = pool_pyramid(single, &st);
  b.indirect_ms = elapsed_ms(t0);

  b.measurements = direct.map().counters().measurements;
  b.direct_writes = direct.map().counters().cell_writes;
  b.direct_chain_writes = b.measurements * static_cast<std::uint64_t>(cfg.num_layers);
  b.indirect_updates = single.counters().cell_writes;
  b.pool_fusions = st.total();

  b.equivalent = true;
  for (int l = 0; l < cfg.num_layers; ++l)
    for (int r = 0; r < pooled.side(l); ++r)
      for (int c = 0; c < pooled.side(l); ++c) {
        const CellState& p = pooled.cell(l, r, c);
        const CellState& d = direct.map().cell(l, r, c);
        if (p.empty() != d.empty() || p.count != d.count) {
          b.equivalent = false;
          continue;
        }
        if (p.empty()) continue;
        const double diff = std::max({relative_difference(p.mean, d.mean, 1e-12),
                                      relative_difference(p.variance, d.variance, 1e-12),
                                      relative_difference(p.precision_sum, d.precision_sum, 1e-12)});
        b.max_relative_difference = std::max(b.max_relative_difference, diff);
      }
  if (b.max_relative_difference > tolerance) b.equivalent = false;
  return b;
}

/// Random stream over a square region; every point gets the depth that
/// routes it to `layer` (or a random layer when layer < 0).
inline std::vector<Measurement> make_stream(std::size_t n, const PyramidConfig& cfg, const CameraModel& camera,
                                            int layer, double half_extent, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-half_extent, half_extent);
  std::uniform_real_distribution<double> h(-0.5, 0.5);
  std::uniform_int_distribution<int> pick(0, cfg.num_layers - 1);
  std::vector<Measurement> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int l = layer < 0 ? pick(rng) : layer;
    // Footprint halfway into the layer's band: res(l-1) <= z/f < res(l).
    const double lo = l == 0 ? 0.25 * cfg.resolution(0) : cfg.resolution(l - 1);
    const double hi = l == cfg.num_layers - 1 ? 2.0 * cfg.resolution(l) : cfg.resolution(l);
    const double depth = 0.5 * (lo + hi) * camera.focal_length;
    Measurement m{pos(rng), pos(rng), h(rng), depth, 0.0};
    m.variance = std::max(measurement_variance(depth, camera), 1e-6);
    out.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation benchmark

struct SegBench {
  int width = 0;
  int height = 0;
  int radius = 0;
  std::uint64_t naive_reads = 0;
  std::uint64_t rolling_reads = 0;
  double naive_ms = 0.0;
  double rolling_ms = 0.0;
  bool equal = false;

  [[nodiscard]] double read_ratio() const noexcept {
    return naive_reads ? static_cast<double>(rolling_reads) / static_cast<double>(naive_reads) : 0.0;
  }
};

inline SegBench bench_segmentation(const Raster<float>& heights, int radius) {
  SegBench b{heights.width(), heights.height(), radius};
  ReadCounter n, r;
  auto t0 = std::chrono::steady_clock::now();
  const auto a = compute_roughness_naive(heights, radius, &n);
  b.naive_ms = elapsed_ms(t0);
  t0 = std::chrono::steady_clock::now();
  const auto c = compute_roughness_rolling(heights, radius, &r);
  b.rolling_ms = elapsed_ms(t0);
  b.naive_reads = n.cell_reads;
  b.rolling_reads = r.cell_reads;
  b.equal = a.size() == c.size() && std::memcmp(a.data().data(), c.data().data(), a.size() * sizeof(float)) == 0;
  return b;
}

/// Low-frequency sinusoidal surface.
inline Raster<float> smooth_surface(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double a = phase(rng), b = phase(rng);
  Raster<float> out(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out(r, c) = static_cast<float>(0.3 * std::sin(0.03 * c + a) + 0.3 * std::cos(0.021 * r + b));
  return out;
}

/// Alternating ramps whose extrema sit on the trailing edge of every window.
inline Raster<float> adversarial_surface(int w, int h) {
  Raster<float> out(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out(r, c) = static_cast<float>(((r + c) % 2 ? 1.0 : -1.0) * (w + h - r - c));
  return out;
}

// ---------------------------------------------------------------------------
// OMG versus Kalman

struct FusionComparison {
  Raster<float> omg_mean, kalman_mean, omg_variance, kalman_variance;
  double max_mean_difference = 0.0;
  std::size_t cells = 0;
  std::size_t variance_violations = 0;  // cells with OMG variance below Kalman
};

/// Fuses the stream into one finest-resolution grid with both filters.
inline FusionComparison compare_fusion(const std::vector<Frame>& frames, const PyramidConfig& cfg) {
  PyramidConfig flat = cfg;
  flat.num_layers = 1;
  flat.map_size = cfg.map_size;
  flat.validate();
  const CameraPose last = frames.empty() ? CameraPose{} : frames.back().pose;
  PyramidMap grid(flat, last.x, last.y);
  const int n = grid.side(0);
  std::vector<CellState> omg(static_cast<std::size_t>(n) * n);
  std::vector<KalmanState> kal(omg.size());
  for (const auto& f : frames)
    for (const auto& m : f.points) {
      if (!detail::valid_measurement(m)) continue;
      const auto idx = grid.locate(0, m.world_x, m.world_y);
      if (!idx) continue;
      const std::size_t i = static_cast<std::size_t>(idx->row) * n + idx->col;
      omg[i] = omg_update(omg[i], {m.height, m.variance});
      kal[i] = kalman_update(kal[i], {m.height, m.variance});
    }
  FusionComparison out{Raster<float>(n, n, kNaN), Raster<float>(n, n, kNaN), Raster<float>(n, n, kNaN),
                       Raster<float>(n, n, kNaN)};
  for (std::size_t i = 0; i < omg.size(); ++i) {
    if (omg[i].empty()) continue;
    ++out.cells;
    out.omg_mean.data()[i] = static_cast<float>(omg[i].mean);
    out.kalman_mean.data()[i] = static_cast<float>(kal[i].mean);
    out.omg_variance.data()[i] = static_cast<float>(omg[i].variance);
    out.kalman_variance.data()[i] = static_cast<float>(kal[i].variance);
    out.max_mean_difference = std::max(out.max_mean_difference, std::abs(omg[i].mean - kal[i].mean));
    if (omg[i].variance < kal[i].variance - 1e-12) ++out.variance_violations;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mean shift from random starts

struct ShiftStudy {
  int starts = 0;
  int on_rock_before = 0;
  int on_rock_after = 0;
  int started_on_rock = 0;
  int freed = 0;  // started on a rock, ended off rocks

  [[nodiscard]] double freed_fraction() const noexcept {
    return started_on_rock ? static_cast<double>(freed) / started_on_rock : 0.0;
  }
};

/// Starts mean shift at uniformly random continuous positions inside the
/// terrain extent whose containing cell has defined features, and counts
/// rock cells before and after.
inline ShiftStudy study_mean_shift(const Terrain& terrain, const FrameResult& frame, const DetectConfig& cfg,
                                   int starts, std::uint64_t seed) {
  const auto& maps = frame.maps;
  const FeatureMaps features = make_features(maps, frame.detection.distance);
  const double res = maps.resolution;
  const int n = maps.landing_mask.width();
  const auto& ts = terrain.spec();
  auto cell_on_rock = [&](GridPoint p) {
    return terrain.on_rock(maps.origin_x + (nearest_cell(p.x) + 0.5) * res,
                           maps.origin_y + (nearest_cell(p.y) + 0.5) * res);
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, static_cast<double>(n - 1));
  ShiftStudy out;
  // Bounded retries keep an unobserved map from looping forever.
  for (long tries = 0; out.starts < starts && tries < 1000L * starts; ++tries) {
    const GridPoint p{unit(rng), unit(rng)};
    const double wx = maps.origin_x + (p.x + 0.5) * res;
    const double wy = maps.origin_y + (p.y + 0.5) * res;
    if (wx < ts.origin_x || wy < ts.origin_y || wx > ts.origin_x + ts.extent_x || wy > ts.origin_y + ts.extent_y)
      continue;
    if (!features.at(nearest_cell(p.y), nearest_cell(p.x))) continue;
    ++out.starts;
    const bool before = cell_on_rock(p);
    const bool after = cell_on_rock(mean_shift(p, features, res, cfg).location);
    out.on_rock_before += before;
    out.on_rock_after += after;
    out.started_on_rock += before;
    out.freed += before && !after;
  }
  return out;
}

}  // namespace omgmap
