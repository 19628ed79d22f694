#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace omgmap {

/// Dense row-major 2D grid. Row index grows with world y, column with world x.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(checked_size(width, height), fill) {}

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] bool contains(int row, int col) const noexcept {
    return row >= 0 && col >= 0 && row < height_ && col < width_;
  }

  T& operator()(int row, int col) noexcept { return data_[index(row, col)]; }
  const T& operator()(int row, int col) const noexcept { return data_[index(row, col)]; }

  [[nodiscard]] std::vector<T>& data() noexcept { return data_; }
  [[nodiscard]] const std::vector<T>& data() const noexcept { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static std::size_t checked_size(int w, int h) {
    if (w < 0 || h < 0) throw std::invalid_argument("raster dimensions must be non-negative");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }
  [[nodiscard]] std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

inline constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();

/// Horizontal extent [col_begin, col_end] of one row of a rasterized region,
/// relative to the region's center cell.
struct RowSpan {
  int dy = 0;
  int col_begin = 0;
  int col_end = 0;  // inclusive
};

/// Rasterized disk: all cells (dy, dx) with dx² + dy² <= radius².
/// Shared by every circular-neighbourhood operation so that competing
/// implementations search the identical region.
class Disk {
 public:
  explicit Disk(int radius) : radius_(radius) {
    if (radius < 0) throw std::invalid_argument("disk radius must be non-negative");
    half_width_.resize(static_cast<std::size_t>(2 * radius + 1));
    for (int dy = -radius; dy <= radius; ++dy) {
      int w = 0;
      while ((w + 1) * (w + 1) + dy * dy <= radius * radius) ++w;
      half_width_[static_cast<std::size_t>(dy + radius)] = w;
      spans_.push_back({dy, -w, w});
    }
  }

  [[nodiscard]] int radius() const noexcept { return radius_; }
  [[nodiscard]] const std::vector<RowSpan>& spans() const noexcept { return spans_; }

  /// Half width of row dy; -1 outside the disk rows.
  [[nodiscard]] int half_width(int dy) const noexcept {
    if (dy < -radius_ || dy > radius_) return -1;
    return half_width_[static_cast<std::size_t>(dy + radius_)];
  }

  [[nodiscard]] bool contains(int dy, int dx) const noexcept {
    const int w = half_width(dy);
    return w >= 0 && dx >= -w && dx <= w;
  }

  [[nodiscard]] std::size_t area() const noexcept {
    std::size_t n = 0;
    for (const auto& s : spans_) n += static_cast<std::size_t>(s.col_end - s.col_begin + 1);
    return n;
  }

 private:
  int radius_;
  std::vector<int> half_width_;
  std::vector<RowSpan> spans_;
};

/// Radius in cells covering `meters` at `resolution`, rounded up.
inline int radius_in_cells(double meters, double resolution) {
  if (!(meters > 0.0) || !(resolution > 0.0)) return 0;
  return static_cast<int>(std::ceil(meters / resolution - 1e-9));
}

}  // namespace omgmap
