#pragma once

// Circular-window min/max search used for terrain roughness.
//
// The naive search scans the whole disk for every cell. The rolling search
// keeps, for the previous cell and for the cell above, the extrema values
// and their 2D locations in a 1D row-major buffer. When a stored location is
// still inside the current disk, the part of the disk shared with that
// neighbour does not need to be scanned again.

#include <cstdint>
#include <limits>
#include <vector>

#include "omgmap/raster.hpp"

namespace omgmap {

struct ReadCounter {
  std::uint64_t cell_reads = 0;
};

struct DiskExtrema {
  Raster<float> max;
  Raster<float> min;
};

/// Cells are undefined (NaN) when inactive or when any cell of their disk is
/// NaN or outside the raster.
using ActiveMask = Raster<std::uint8_t>;

inline DiskExtrema disk_extrema_naive(const Raster<float>& h, int radius, ReadCounter* reads = nullptr,
                                      const ActiveMask* active = nullptr) {
  const Disk disk(radius);
  const int width = h.width();
  const int height = h.height();
  DiskExtrema out{Raster<float>(width, height, kNaN), Raster<float>(width, height, kNaN)};
  std::uint64_t n_reads = 0;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (active && !(*active)(r, c)) continue;
      float hi = -std::numeric_limits<float>::infinity();
      float lo = std::numeric_limits<float>::infinity();
      bool defined = true;
      for (const auto& s : disk.spans()) {
        const int rr = r + s.dy;
        for (int cc = c + s.col_begin; cc <= c + s.col_end; ++cc) {
          ++n_reads;
          if (!h.contains(rr, cc)) {
            defined = false;
            continue;
          }
          const float v = h(rr, cc);
          if (std::isnan(v)) {
            defined = false;
            continue;
          }
          if (v > hi) hi = v;
          if (v < lo) lo = v;
        }
      }
      if (defined) {
        out.max(r, c) = hi;
        out.min(r, c) = lo;
      }
    }
  }
  if (reads) reads->cell_reads += n_reads;
  return out;
}

namespace detail {

struct RegionSpans {
  std::vector<RowSpan> spans;
  std::size_t area = 0;
};

// Cells of `disk` for which `excluded(dy, dx)` is false, as row spans.
template <typename Pred>
RegionSpans disk_minus(const Disk& disk, Pred excluded) {
  RegionSpans out;
  for (const auto& s : disk.spans()) {
    int run_begin = 0;
    bool in_run = false;
    for (int dx = s.col_begin; dx <= s.col_end + 1; ++dx) {
      const bool keep = dx <= s.col_end && !excluded(s.dy, dx);
      if (keep && !in_run) {
        run_begin = dx;
        in_run = true;
      } else if (!keep && in_run) {
        out.spans.push_back({s.dy, run_begin, dx - 1});
        out.area += static_cast<std::size_t>(dx - run_begin);
        in_run = false;
      }
    }
  }
  return out;
}

struct ExtremaEntry {
  enum class State : std::uint8_t { kUnknown, kDefined, kUndefined };
  State state = State::kUnknown;
  float max = 0.0f;
  float min = 0.0f;
  int max_r = 0, max_c = 0;
  int min_r = 0, min_c = 0;
  int hole_r = 0, hole_c = 0;  // an undefined cell inside the disk
};

}  // namespace detail

/// Rolling-buffer variant of disk_extrema_naive; identical output.
inline DiskExtrema disk_extrema_rolling(const Raster<float>& h, int radius, ReadCounter* reads = nullptr,
                                        const ActiveMask* active = nullptr) {
  using detail::ExtremaEntry;
  using State = ExtremaEntry::State;

  const Disk disk(radius);
  const int width = h.width();
  const int height = h.height();
  DiskExtrema out{Raster<float>(width, height, kNaN), Raster<float>(width, height, kNaN)};

  // Search subregions: the full disk, the disk minus the left neighbour's
  // disk, minus the top neighbour's disk, and minus both.
  const auto full = detail::disk_minus(disk, [](int, int) { return false; });
  const auto not_left = detail::disk_minus(disk, [&](int dy, int dx) { return disk.contains(dy, dx + 1); });
  const auto not_top = detail::disk_minus(disk, [&](int dy, int dx) { return disk.contains(dy + 1, dx); });
  const auto not_both = detail::disk_minus(
      disk, [&](int dy, int dx) { return disk.contains(dy, dx + 1) || disk.contains(dy + 1, dx); });
  const bool split_scan = not_left.area + not_top.area < full.area;

  std::vector<ExtremaEntry> buffer(static_cast<std::size_t>(width));
  std::uint64_t n_reads = 0;

  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      ExtremaEntry& slot = buffer[static_cast<std::size_t>(c)];  // holds the top neighbour
      if (active && !(*active)(r, c)) {
        slot.state = State::kUnknown;
        continue;
      }
      const ExtremaEntry top = r > 0 ? slot : ExtremaEntry{};
      const ExtremaEntry left = c > 0 ? buffer[static_cast<std::size_t>(c - 1)] : ExtremaEntry{};
      auto inside = [&](int pr, int pc) { return disk.contains(pr - r, pc - c); };
      auto dist2 = [&](int pr, int pc) { return (pr - r) * (pr - r) + (pc - c) * (pc - c); };

      ExtremaEntry cur;
      // An undefined neighbour whose hole is still inside makes this cell undefined.
      const ExtremaEntry* hole_src = nullptr;
      if (left.state == State::kUndefined && inside(left.hole_r, left.hole_c)) hole_src = &left;
      else if (top.state == State::kUndefined && inside(top.hole_r, top.hole_c)) hole_src = &top;
      if (hole_src) {
        cur.state = State::kUndefined;
        cur.hole_r = hole_src->hole_r;
        cur.hole_c = hole_src->hole_c;
        slot = cur;
        continue;
      }

      const bool left_def = left.state == State::kDefined;
      const bool top_def = top.state == State::kDefined;
      const bool left_max = left_def && inside(left.max_r, left.max_c);
      const bool left_min = left_def && inside(left.min_r, left.min_c);
      const bool top_max = top_def && inside(top.max_r, top.max_c);
      const bool top_min = top_def && inside(top.min_r, top.min_c);

      float hi = -std::numeric_limits<float>::infinity();
      float lo = std::numeric_limits<float>::infinity();
      int hi_r = 0, hi_c = 0, lo_r = 0, lo_c = 0;
      bool have_hi = false, have_lo = false;
      auto offer_max = [&](float v, int pr, int pc) {
        if (!have_hi || v > hi || (v == hi && dist2(pr, pc) < dist2(hi_r, hi_c))) {
          hi = v, hi_r = pr, hi_c = pc, have_hi = true;
        }
      };
      auto offer_min = [&](float v, int pr, int pc) {
        if (!have_lo || v < lo || (v == lo && dist2(pr, pc) < dist2(lo_r, lo_c))) {
          lo = v, lo_r = pr, lo_c = pc, have_lo = true;
        }
      };
      if (left_max) offer_max(left.max, left.max_r, left.max_c);
      if (top_max) offer_max(top.max, top.max_r, top.max_c);
      if (left_min) offer_min(left.min, left.min_r, left.min_c);
      if (top_min) offer_min(top.min, top.min_r, top.min_c);

      // A region may be skipped only where the stored extremum of that
      // neighbour covers it; scanning extra cells of the disk is harmless.
      // Code: bit 0 = left reusable, bit 1 = top reusable.
      const int code_max = (left_max ? 1 : 0) | (top_max ? 2 : 0);
      const int code_min = (left_min ? 1 : 0) | (top_min ? 2 : 0);
      const detail::RegionSpans* regions[4] = {&full, &not_left, &not_top, &not_both};
      const detail::RegionSpans* scans[2] = {nullptr, nullptr};
      const int common = code_max & code_min;
      if (common != 0 || (code_max == 0 && code_min == 0)) {
        scans[0] = regions[common];
      } else if (code_max != 0 && code_min != 0 && split_scan) {
        // One extremum reusable from the left, the other from the top.
        scans[0] = regions[code_max];
        scans[1] = regions[code_min];
      } else {
        scans[0] = &full;
      }

      bool undefined = false;
      for (const auto* region : scans) {
        if (!region) break;
        for (const auto& s : region->spans) {
          const int rr = r + s.dy;
          const int c0 = c + s.col_begin;
          const int c1 = c + s.col_end;
          // Cells past the raster edge read as holes; scan up to the first one.
          int stop = c1;
          if (rr < 0 || rr >= height) stop = c0 - 1;
          else if (c0 < 0) stop = c0 - 1;
          else if (c1 >= width) stop = width - 1;
          const float* row = stop >= c0 ? &h(rr, 0) : nullptr;
          int cc = c0;
          for (; cc <= stop; ++cc) {
            const float v = row[cc];
            if (std::isnan(v)) break;
            if (v >= hi) offer_max(v, rr, cc);
            if (v <= lo) offer_min(v, rr, cc);
          }
          if (cc <= c1) {
            n_reads += static_cast<std::uint64_t>(cc - c0 + 1);
            cur.hole_r = rr;
            cur.hole_c = cc;
            undefined = true;
            break;
          }
          n_reads += static_cast<std::uint64_t>(c1 - c0 + 1);
        }
        if (undefined) break;
      }

      if (undefined) {
        cur.state = State::kUndefined;
      } else {
        cur.state = State::kDefined;
        cur.max = hi, cur.max_r = hi_r, cur.max_c = hi_c;
        cur.min = lo, cur.min_r = lo_r, cur.min_c = lo_c;
        out.max(r, c) = hi;
        out.min(r, c) = lo;
      }
      slot = cur;
    }
  }
  if (reads) reads->cell_reads += n_reads;
  return out;
}

namespace detail {

inline Raster<float> difference(const DiskExtrema& e) {
  Raster<float> out(e.max.width(), e.max.height(), kNaN);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float hi = e.max.data()[i];
    const float lo = e.min.data()[i];
    if (!std::isnan(hi) && !std::isnan(lo)) out.data()[i] = hi - lo;
  }
  return out;
}

}  // namespace detail

/// Roughness = max - min height in the disk of `radius` cells. Brute force.
inline Raster<float> compute_roughness_naive(const Raster<float>& heights, int radius,
                                             ReadCounter* reads = nullptr, const ActiveMask* active = nullptr) {
  return detail::difference(disk_extrema_naive(heights, radius, reads, active));
}

/// Roughness via the rolling extrema buffer; bit-identical to the naive search.
inline Raster<float> compute_roughness_rolling(const Raster<float>& heights, int radius,
                                               ReadCounter* reads = nullptr, const ActiveMask* active = nullptr) {
  return detail::difference(disk_extrema_rolling(heights, radius, reads, active));
}

/// Maximum over the defined cells of each disk; NaN only if none is defined.
inline Raster<float> disk_max_defined(const Raster<float>& values, int radius) {
  const Disk disk(radius);
  Raster<float> out(values.width(), values.height(), kNaN);
  for (int r = 0; r < values.height(); ++r)
    for (int c = 0; c < values.width(); ++c) {
      float hi = kNaN;
      for (const auto& s : disk.spans()) {
        const int rr = r + s.dy;
        if (rr < 0 || rr >= values.height()) continue;
        for (int cc = std::max(0, c + s.col_begin); cc <= std::min(values.width() - 1, c + s.col_end); ++cc) {
          const float v = values(rr, cc);
          if (!std::isnan(v) && (std::isnan(hi) || v > hi)) hi = v;
        }
      }
      out(r, c) = hi;
    }
  return out;
}

}  // namespace omgmap
