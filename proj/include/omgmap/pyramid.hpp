#pragma once

// Multi-resolution elevation pyramid with a rolling (toroidal) origin.
//
// Layer 0 is the finest grid; every layer above halves the number of cells
// per side. Cells are addressed through per-layer ring offsets so shifting
// the map only touches the rows/columns that enter it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "omgmap/omg.hpp"
#include "omgmap/raster.hpp"

namespace omgmap {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PyramidConfig {
  int num_layers = 3;
  double base_resolution = 0.05;
  double map_size = 24.0;
  double first_measurement_inflation = 25.0;

  [[nodiscard]] double resolution(int layer) const noexcept {
    return base_resolution * static_cast<double>(1 << layer);
  }
  [[nodiscard]] int cells_per_side(int layer) const noexcept {
    return top_cells() << (num_layers - 1 - layer);
  }
  [[nodiscard]] int top_cells() const noexcept {
    return static_cast<int>(std::llround(map_size / resolution(num_layers - 1)));
  }

  void validate() const {
    if (num_layers < 1 || num_layers > 16) throw ConfigError("num_layers must be in [1, 16]");
    if (!(base_resolution > 0.0) || !std::isfinite(base_resolution))
      throw ConfigError("base_resolution must be positive");
    if (!(map_size > 0.0) || !std::isfinite(map_size)) throw ConfigError("map_size must be positive");
    const double top = map_size / resolution(num_layers - 1);
    if (top < 1.0 - 1e-9 || std::abs(top - std::round(top)) > 1e-6)
      throw ConfigError("map_size must be a whole number of top-layer cells");
    if (!(first_measurement_inflation >= 1.0))
      throw ConfigError("first_measurement_inflation must be >= 1");
  }
};

struct CameraModel {
  double focal_length = 500.0;   // pixels
  double baseline = 0.2;         // meters
  double disparity_noise = 0.5;  // pixels

  void validate() const {
    if (!(focal_length > 0.0)) throw ConfigError("focal_length must be positive");
    if (!(baseline > 0.0)) throw ConfigError("baseline must be positive");
    if (!(disparity_noise >= 0.0)) throw ConfigError("disparity_noise must be non-negative");
  }
};

struct Measurement {
  double world_x = 0.0;
  double world_y = 0.0;
  double height = 0.0;
  double depth = 1.0;
  double variance = 1.0;
};

/// Stereo depth standard deviation from disparity quantization: z²·σ_d/(f·b).
inline double depth_sigma(double depth, const CameraModel& camera) noexcept {
  return depth * depth * camera.disparity_noise / (camera.focal_length * camera.baseline);
}

inline double measurement_variance(double depth, const CameraModel& camera) noexcept {
  const double s = depth_sigma(depth, camera);
  return s * s;
}

/// Lowest layer whose cell footprint strictly exceeds the pixel footprint z/f.
inline int select_layer(double depth, const CameraModel& camera, const PyramidConfig& cfg) noexcept {
  const double footprint = depth / camera.focal_length;
  for (int l = 0; l < cfg.num_layers; ++l) {
    if (cfg.resolution(l) > footprint) return l;
  }
  return cfg.num_layers - 1;
}

/// Logical (origin-relative) cell address.
struct CellIndex {
  int layer = 0;
  int row = 0;
  int col = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Square grid with toroidal storage. Logical (row, col) maps to storage
/// ((row + ring_row) mod n, (col + ring_col) mod n).
template <typename T>
class RollingGrid {
 public:
  RollingGrid() = default;
  explicit RollingGrid(int n, T fill = T{}) : n_(n), data_(static_cast<std::size_t>(n) * n, fill) {}

  [[nodiscard]] int side() const noexcept { return n_; }
  [[nodiscard]] int ring_row() const noexcept { return ring_row_; }
  [[nodiscard]] int ring_col() const noexcept { return ring_col_; }

  T& storage(int sr, int sc) noexcept { return data_[static_cast<std::size_t>(sr) * n_ + sc]; }
  const T& storage(int sr, int sc) const noexcept {
    return data_[static_cast<std::size_t>(sr) * n_ + sc];
  }
  T& logical(int row, int col) noexcept { return storage(wrap(row + ring_row_), wrap(col + ring_col_)); }
  const T& logical(int row, int col) const noexcept {
    return storage(wrap(row + ring_row_), wrap(col + ring_col_));
  }

  [[nodiscard]] int storage_row(int row) const noexcept { return wrap(row + ring_row_); }
  [[nodiscard]] int storage_col(int col) const noexcept { return wrap(col + ring_col_); }

  /// Moves the logical window by (drow, dcol) cells; cells entering the
  /// window are reset to `empty`, all others keep their storage slot.
  void shift(std::int64_t drow, std::int64_t dcol, const T& empty) {
    if (drow == 0 && dcol == 0) return;
    if (std::llabs(drow) >= n_ || std::llabs(dcol) >= n_) {
      std::fill(data_.begin(), data_.end(), empty);
      ring_row_ = wrap64(ring_row_ + drow);
      ring_col_ = wrap64(ring_col_ + dcol);
      return;
    }
    ring_row_ = wrap64(ring_row_ + drow);
    ring_col_ = wrap64(ring_col_ + dcol);
    const int dr = static_cast<int>(drow);
    const int dc = static_cast<int>(dcol);
    const int row_begin = dr > 0 ? n_ - dr : 0;
    const int row_end = dr > 0 ? n_ : -dr;
    for (int r = row_begin; r < row_end; ++r)
      for (int c = 0; c < n_; ++c) logical(r, c) = empty;
    const int col_begin = dc > 0 ? n_ - dc : 0;
    const int col_end = dc > 0 ? n_ : -dc;
    for (int r = 0; r < n_; ++r)
      for (int c = col_begin; c < col_end; ++c) logical(r, c) = empty;
  }

  friend bool operator==(const RollingGrid&, const RollingGrid&) = default;

 private:
  [[nodiscard]] int wrap(int v) const noexcept {
    const int m = v % n_;
    return m < 0 ? m + n_ : m;
  }
  [[nodiscard]] int wrap64(std::int64_t v) const noexcept {
    const std::int64_t m = v % n_;
    return static_cast<int>(m < 0 ? m + n_ : m);
  }

  int n_ = 0;
  int ring_row_ = 0;
  int ring_col_ = 0;
  std::vector<T> data_;
};

/// Instrumentation shared by the update paths and the benchmarks.
struct MapCounters {
  std::uint64_t measurements = 0;   // accepted measurements
  std::uint64_t dropped = 0;        // out of bounds or invalid
  std::uint64_t cell_writes = 0;    // CellState writes
  std::uint64_t layer_touches = 0;  // distinct layers written per measurement, summed
};

class PyramidMap {
 public:
  explicit PyramidMap(const PyramidConfig& cfg, double center_x = 0.0, double center_y = 0.0)
      : cfg_(cfg) {
    cfg_.validate();
    for (int l = 0; l < cfg_.num_layers; ++l) layers_.emplace_back(cfg_.cells_per_side(l));
    origin_top_col_ = target_origin(center_x);
    origin_top_row_ = target_origin(center_y);
  }

  [[nodiscard]] const PyramidConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] int num_layers() const noexcept { return cfg_.num_layers; }
  [[nodiscard]] int side(int layer) const noexcept { return layers_[static_cast<std::size_t>(layer)].side(); }
  [[nodiscard]] double resolution(int layer) const noexcept { return cfg_.resolution(layer); }
  [[nodiscard]] double top_resolution() const noexcept { return cfg_.resolution(cfg_.num_layers - 1); }

  /// World coordinates of the map's lower-left corner.
  [[nodiscard]] double origin_x() const noexcept { return static_cast<double>(origin_top_col_) * top_resolution(); }
  [[nodiscard]] double origin_y() const noexcept { return static_cast<double>(origin_top_row_) * top_resolution(); }
  [[nodiscard]] std::int64_t origin_top_col() const noexcept { return origin_top_col_; }
  [[nodiscard]] std::int64_t origin_top_row() const noexcept { return origin_top_row_; }

  /// Logical cell containing world point (x, y) at `layer`, if inside the map.
  /// Indices are derived from the finest-layer index by halving, so every
  /// layer agrees on cell boundaries.
  [[nodiscard]] std::optional<CellIndex> locate(int layer, double x, double y) const noexcept {
    if (!std::isfinite(x) || !std::isfinite(y)) return std::nullopt;
    const double fx = std::floor(x / cfg_.base_resolution);
    const double fy = std::floor(y / cfg_.base_resolution);
    if (std::abs(fx) > 4e18 || std::abs(fy) > 4e18) return std::nullopt;
    const std::int64_t shift = cfg_.num_layers - 1 - layer;
    const std::int64_t col = (static_cast<std::int64_t>(fx) >> layer) - (origin_top_col_ << shift);
    const std::int64_t row = (static_cast<std::int64_t>(fy) >> layer) - (origin_top_row_ << shift);
    const int n = side(layer);
    if (col < 0 || row < 0 || col >= n || row >= n) return std::nullopt;
    return CellIndex{layer, static_cast<int>(row), static_cast<int>(col)};
  }

  /// World coordinates of a logical cell's center.
  [[nodiscard]] double cell_center_x(int layer, int col) const noexcept {
    return origin_x() + (col + 0.5) * resolution(layer);
  }
  [[nodiscard]] double cell_center_y(int layer, int row) const noexcept {
    return origin_y() + (row + 0.5) * resolution(layer);
  }

  CellState& cell(int layer, int row, int col) noexcept { return grid(layer).logical(row, col); }
  [[nodiscard]] const CellState& cell(int layer, int row, int col) const noexcept {
    return grid(layer).logical(row, col);
  }
  CellState& cell(const CellIndex& i) noexcept { return cell(i.layer, i.row, i.col); }
  [[nodiscard]] const CellState& cell(const CellIndex& i) const noexcept { return cell(i.layer, i.row, i.col); }

  RollingGrid<CellState>& grid(int layer) noexcept { return layers_[static_cast<std::size_t>(layer)]; }
  [[nodiscard]] const RollingGrid<CellState>& grid(int layer) const noexcept {
    return layers_[static_cast<std::size_t>(layer)];
  }

  /// Translates the map by whole top-layer cells. Positive dx moves the
  /// origin toward +x.
  void shift_cells(std::int64_t dx_top, std::int64_t dy_top) {
    for (int l = 0; l < cfg_.num_layers; ++l) {
      const std::int64_t f = std::int64_t{1} << (cfg_.num_layers - 1 - l);
      grid(l).shift(dy_top * f, dx_top * f, CellState{});
    }
    origin_top_col_ += dx_top;
    origin_top_row_ += dy_top;
  }

  /// Top-cell shift that would center the map on (x, y).
  [[nodiscard]] std::pair<std::int64_t, std::int64_t> shift_for_center(double x, double y) const noexcept {
    return {target_origin(x) - origin_top_col_, target_origin(y) - origin_top_row_};
  }

  MapCounters& counters() noexcept { return counters_; }
  [[nodiscard]] const MapCounters& counters() const noexcept { return counters_; }

  [[nodiscard]] std::size_t filled_cells(int layer) const noexcept {
    std::size_t n = 0;
    const auto& g = grid(layer);
    for (int r = 0; r < g.side(); ++r)
      for (int c = 0; c < g.side(); ++c) n += g.storage(r, c).empty() ? 0 : 1;
    return n;
  }

  /// Same geometry, all cells empty, counters cleared.
  [[nodiscard]] PyramidMap empty_like() const {
    PyramidMap out = *this;
    for (auto& g : out.layers_)
      for (int r = 0; r < g.side(); ++r)
        for (int c = 0; c < g.side(); ++c) g.storage(r, c) = CellState{};
    out.counters_ = {};
    return out;
  }

 private:
  [[nodiscard]] std::int64_t target_origin(double center) const noexcept {
    const double top = top_resolution();
    return static_cast<std::int64_t>(std::floor(center / top)) - cfg_.top_cells() / 2;
  }

  PyramidConfig cfg_;
  std::vector<RollingGrid<CellState>> layers_;
  std::int64_t origin_top_col_ = 0;
  std::int64_t origin_top_row_ = 0;
  MapCounters counters_;
};

namespace detail {

inline bool valid_measurement(const Measurement& m) noexcept {
  return std::isfinite(m.world_x) && std::isfinite(m.world_y) && std::isfinite(m.height) &&
         std::isfinite(m.depth) && m.depth > 0.0 && std::isfinite(m.variance) && m.variance > 0.0;
}

}  // namespace detail

/// Layer and cell a measurement is routed to, or nullopt when it is dropped.
inline std::optional<CellIndex> route(const PyramidMap& map, const Measurement& m, const CameraModel& camera) {
  if (!detail::valid_measurement(m)) return std::nullopt;
  return map.locate(select_layer(m.depth, camera, map.config()), m.world_x, m.world_y);
}

/// Fuses `m` into the one cell of its selected layer. The first measurement
/// landing in an empty cell has its variance inflated.
inline bool update_single_layer(PyramidMap& map, const Measurement& m, const CameraModel& camera) {
  const auto idx = route(map, m, camera);
  if (!idx) {
    ++map.counters().dropped;
    return false;
  }
  CellState& c = map.cell(*idx);
  const double variance = c.empty() ? m.variance * map.config().first_measurement_inflation : m.variance;
  c = omg_update(c, {m.height, variance});
  auto& k = map.counters();
  ++k.measurements;
  ++k.cell_writes;
  ++k.layer_touches;
  return true;
}

/// Multi-layer baseline: every measurement is fused directly into all cells,
/// at every layer, that intersect the footprint of its routed cell. That is
/// the routed cell's ancestor chain plus all of its descendants.
class DirectPyramid {
 public:
  explicit DirectPyramid(const PyramidConfig& cfg, double center_x = 0.0, double center_y = 0.0)
      : map_(cfg, center_x, center_y) {
    for (int l = 0; l < map_.num_layers(); ++l) routed_.emplace_back(map_.side(l), std::uint8_t{0});
  }

  [[nodiscard]] const PyramidMap& map() const noexcept { return map_; }
  PyramidMap& map() noexcept { return map_; }

  void shift_cells(std::int64_t dx_top, std::int64_t dy_top) {
    map_.shift_cells(dx_top, dy_top);
    const int n = map_.num_layers();
    for (int l = 0; l < n; ++l) {
      const std::int64_t f = std::int64_t{1} << (n - 1 - l);
      routed_[static_cast<std::size_t>(l)].shift(dy_top * f, dx_top * f, 0);
    }
  }

  bool update(const Measurement& m, const CameraModel& camera) {
    const auto idx = route(map_, m, camera);
    auto& k = map_.counters();
    if (!idx) {
      ++k.dropped;
      return false;
    }
    // First-hit inflation follows the routed cell, exactly as in the
    // single-layer path, so both schemes fuse identical measurements.
    auto& hit = routed_[static_cast<std::size_t>(idx->layer)].logical(idx->row, idx->col);
    const double variance = hit ? m.variance : m.variance * map_.config().first_measurement_inflation;
    hit = 1;
    const GaussianMeasurement g{m.height, variance};
    for (int l = idx->layer; l < map_.num_layers(); ++l) {
      const int s = l - idx->layer;
      CellState& c = map_.cell(l, idx->row >> s, idx->col >> s);
      c = omg_update(c, g);
      ++k.cell_writes;
    }
    for (int l = idx->layer - 1; l >= 0; --l) {
      const int span = 1 << (idx->layer - l);
      for (int r = idx->row * span; r < (idx->row + 1) * span; ++r)
        for (int c = idx->col * span; c < (idx->col + 1) * span; ++c) {
          CellState& cs = map_.cell(l, r, c);
          cs = omg_update(cs, g);
          ++k.cell_writes;
        }
    }
    ++k.measurements;
    k.layer_touches += static_cast<std::uint64_t>(map_.num_layers());
    return true;
  }

 private:
  PyramidMap map_;
  std::vector<RollingGrid<std::uint8_t>> routed_;
};

inline bool update_direct_all_layers(DirectPyramid& direct, const Measurement& m, const CameraModel& camera) {
  return direct.update(m, camera);
}

/// Number of cells in one top cell's full pyramid: 1 + 4 + ... + 4^(N-1).
constexpr std::uint64_t cells_per_cell_pyramid(int num_layers) noexcept {
  std::uint64_t n = 0;
  std::uint64_t p = 1;
  for (int l = 0; l < num_layers; ++l, p *= 4) n += p;
  return n;
}

struct PoolStats {
  std::uint64_t up_fusions = 0;
  std::uint64_t down_fusions = 0;
  std::uint64_t copies = 0;  // fusions into empty targets

  [[nodiscard]] std::uint64_t total() const noexcept { return up_fusions + down_fusions; }
};

/// Pyramid pooling. Afterwards every cell holds the fusion of all
/// measurements whose routed cell overlaps it, as the direct multi-layer
/// update would.
///
/// Up pass: each filled cell is fused into its parent, bottom to top.
/// Down pass: a snapshot of the input accumulates ancestor-only states top to
/// bottom and each cell receives the accumulated state of its parent. Both
/// passes walk every layer in storage row-major order; ring offsets are
/// aligned across layers, so the parent of storage (r, c) is (r/2, c/2).
inline PyramidMap pool_pyramid(const PyramidMap& input, PoolStats* stats = nullptr) {
  PoolStats local;
  PoolStats& st = stats ? *stats : local;
  PyramidMap out = input;
  const int n_layers = input.num_layers();

  auto fuse_into = [&st](CellState& target, const CellState& source, std::uint64_t& counter) {
    if (target.empty()) ++st.copies;
    target = fuse_states(target, source);
    ++counter;
  };

  for (int l = 0; l + 1 < n_layers; ++l) {
    const auto& child = out.grid(l);
    auto& parent = out.grid(l + 1);
    const int n = child.side();
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        const CellState& s = child.storage(r, c);
        if (!s.empty()) fuse_into(parent.storage(r >> 1, c >> 1), s, st.up_fusions);
      }
  }

  // Ancestor accumulator, initialised from the un-pooled input.
  std::vector<RollingGrid<CellState>> acc;
  acc.reserve(static_cast<std::size_t>(n_layers));
  for (int l = 0; l < n_layers; ++l) acc.push_back(input.grid(l));

  for (int l = n_layers - 2; l >= 0; --l) {
    const auto& above = acc[static_cast<std::size_t>(l + 1)];
    auto& here = acc[static_cast<std::size_t>(l)];
    auto& target = out.grid(l);
    const int n = target.side();
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        const CellState& s = above.storage(r >> 1, c >> 1);
        if (s.empty()) continue;
        fuse_into(target.storage(r, c), s, st.down_fusions);
        if (l > 0) fuse_into(here.storage(r, c), s, st.down_fusions);
      }
  }
  out.counters().cell_writes += st.total();
  return out;
}

/// Applies time inflation to every non-empty cell.
inline void apply_inflation_all(PyramidMap& map, double k) {
  if (!(k >= 1.0)) throw DomainError("inflation factor must be >= 1");
  if (k == 1.0) return;
  for (int l = 0; l < map.num_layers(); ++l) {
    auto& g = map.grid(l);
    for (int r = 0; r < g.side(); ++r)
      for (int c = 0; c < g.side(); ++c) {
        CellState& s = g.storage(r, c);
        if (!s.empty()) s = inflate(s, k);
      }
  }
}

/// Recenters the map on a world position (rolling-buffer shift).
inline void shift_map(PyramidMap& map, double center_x, double center_y) {
  const auto [dx, dy] = map.shift_for_center(center_x, center_y);
  map.shift_cells(dx, dy);
}

enum class Channel { kMean, kVariance, kPrecisionSum, kCount };

inline const char* channel_name(Channel c) noexcept {
  switch (c) {
    case Channel::kMean: return "mean";
    case Channel::kVariance: return "variance";
    case Channel::kPrecisionSum: return "precision_sum";
    case Channel::kCount: return "count";
  }
  return "unknown";
}

/// One channel of one layer in logical order, empty cells as NaN.
inline Raster<float> layer_raster(const PyramidMap& map, int layer, Channel channel) {
  const int n = map.side(layer);
  Raster<float> out(n, n, kNaN);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const CellState& s = map.cell(layer, r, c);
      if (s.empty()) continue;
      double v = 0.0;
      switch (channel) {
        case Channel::kMean: v = s.mean; break;
        case Channel::kVariance: v = s.variance; break;
        case Channel::kPrecisionSum: v = s.precision_sum; break;
        case Channel::kCount: v = static_cast<double>(s.count); break;
      }
      out(r, c) = static_cast<float>(v);
    }
  return out;
}

}  // namespace omgmap
