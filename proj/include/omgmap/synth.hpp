#pragma once

// Synthetic world: procedural terrain with spherical-cap rocks, a descending
// camera trajectory, and stereo-noise point clouds. Everything is a pure
// function of the specs and their seeds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "omgmap/pyramid.hpp"
#include "omgmap/raster.hpp"
#include "omgmap/raster_io.hpp"

namespace omgmap {

struct Rock {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.2;  // footprint radius, meters
  double height = 0.2;  // cap height, meters
};

/// Height ramp along +x: adds gradient * clamp(x - x_begin, 0, x_end - x_begin).
struct Ramp {
  double x_begin = 0.0;
  double x_end = 0.0;
  double gradient = 0.0;
};

struct TerrainSpec {
  std::uint64_t seed = 1;
  double origin_x = -14.0;  // lower-left corner of the generated area
  double origin_y = -14.0;
  double extent_x = 88.0;
  double extent_y = 28.0;
  double base_height = 0.0;
  double undulation_amplitude = 0.05;
  double undulation_wavelength = 10.0;
  std::vector<Rock> rocks;  // explicit rocks, kept as given
  int rock_count = 120;     // additional random rocks
  double rock_radius_min = 0.1;
  double rock_radius_max = 0.3;
  double rock_height_min = 0.1;
  double rock_height_max = 0.3;
  std::vector<Ramp> ramps;
  double raster_resolution = 0.05;  // ground-truth export resolution
};

/// Analytic height field plus the resolved rock list.
class Terrain {
 public:
  explicit Terrain(TerrainSpec spec) : spec_(std::move(spec)) {
    std::mt19937_64 rng(spec_.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    phase_x_ = 2.0 * std::numbers::pi * unit(rng);
    phase_y_ = 2.0 * std::numbers::pi * unit(rng);
    rocks_ = spec_.rocks;
    for (int i = 0; i < spec_.rock_count; ++i) {
      Rock r;
      r.radius = spec_.rock_radius_min + (spec_.rock_radius_max - spec_.rock_radius_min) * unit(rng);
      r.height = spec_.rock_height_min + (spec_.rock_height_max - spec_.rock_height_min) * unit(rng);
      r.x = spec_.origin_x + r.radius + (spec_.extent_x - 2 * r.radius) * unit(rng);
      r.y = spec_.origin_y + r.radius + (spec_.extent_y - 2 * r.radius) * unit(rng);
      rocks_.push_back(r);
    }
    for (std::size_t i = 0; i < rocks_.size(); ++i) {
      const Rock& r = rocks_[i];
      if (!(r.radius > 0.0) || !(r.height > 0.0)) continue;
      const std::int64_t bx0 = bucket(r.x - r.radius), bx1 = bucket(r.x + r.radius);
      const std::int64_t by0 = bucket(r.y - r.radius), by1 = bucket(r.y + r.radius);
      for (std::int64_t by = by0; by <= by1; ++by)
        for (std::int64_t bx = bx0; bx <= bx1; ++bx) buckets_[key(bx, by)].push_back(i);
    }
  }

  [[nodiscard]] const TerrainSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const std::vector<Rock>& rocks() const noexcept { return rocks_; }

  /// Height without rocks.
  [[nodiscard]] double ground(double x, double y) const noexcept {
    double h = spec_.base_height;
    if (spec_.undulation_amplitude != 0.0) {
      const double k = 2.0 * std::numbers::pi / spec_.undulation_wavelength;
      h += spec_.undulation_amplitude * std::sin(k * x + phase_x_) * std::sin(k * y + phase_y_);
    }
    for (const auto& ramp : spec_.ramps) h += ramp.gradient * std::clamp(x - ramp.x_begin, 0.0, ramp.x_end - ramp.x_begin);
    return h;
  }

  /// Tallest rock cap above the ground at (x, y), 0 when off rocks.
  [[nodiscard]] double rock_height(double x, double y) const noexcept {
    const auto it = buckets_.find(key(bucket(x), bucket(y)));
    if (it == buckets_.end()) return 0.0;
    double best = 0.0;
    for (std::size_t i : it->second) best = std::max(best, cap_height(rocks_[i], x, y));
    return best;
  }

  [[nodiscard]] double height(double x, double y) const noexcept { return ground(x, y) + rock_height(x, y); }

  [[nodiscard]] bool on_rock(double x, double y) const noexcept {
    const auto it = buckets_.find(key(bucket(x), bucket(y)));
    if (it == buckets_.end()) return false;
    for (std::size_t i : it->second) {
      const Rock& r = rocks_[i];
      if ((x - r.x) * (x - r.x) + (y - r.y) * (y - r.y) < r.radius * r.radius) return true;
    }
    return false;
  }

  /// Distance from (x, y) to the nearest rock footprint (0 on a rock).
  [[nodiscard]] double distance_to_rock(double x, double y, double search = 2.0) const noexcept {
    double best = std::numeric_limits<double>::infinity();
    for (std::int64_t by = bucket(y - search); by <= bucket(y + search); ++by)
      for (std::int64_t bx = bucket(x - search); bx <= bucket(x + search); ++bx) {
        const auto it = buckets_.find(key(bx, by));
        if (it == buckets_.end()) continue;
        for (std::size_t i : it->second) {
          const Rock& r = rocks_[i];
          best = std::min(best, std::max(0.0, std::hypot(x - r.x, y - r.y) - r.radius));
        }
      }
    return best;
  }

  /// Samples the height field at the centers of a raster's cells.
  [[nodiscard]] Raster<float> height_raster(double origin_x, double origin_y, double res, int w, int h) const {
    Raster<float> out(w, h);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) out(r, c) = static_cast<float>(height(origin_x + (c + 0.5) * res, origin_y + (r + 0.5) * res));
    return out;
  }

  [[nodiscard]] Raster<std::uint8_t> rock_mask(double origin_x, double origin_y, double res, int w, int h) const {
    Raster<std::uint8_t> out(w, h, 0);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) out(r, c) = on_rock(origin_x + (c + 0.5) * res, origin_y + (r + 0.5) * res) ? 1 : 0;
    return out;
  }

  [[nodiscard]] int raster_width() const noexcept {
    return static_cast<int>(std::llround(spec_.extent_x / spec_.raster_resolution));
  }
  [[nodiscard]] int raster_height() const noexcept {
    return static_cast<int>(std::llround(spec_.extent_y / spec_.raster_resolution));
  }

 private:
  static constexpr double kBucket = 1.0;
  static std::int64_t bucket(double v) noexcept { return static_cast<std::int64_t>(std::floor(v / kBucket)); }
  static std::uint64_t key(std::int64_t bx, std::int64_t by) noexcept {
    return (static_cast<std::uint64_t>(bx) << 32) ^ static_cast<std::uint64_t>(by & 0xffffffff);
  }
  static double cap_height(const Rock& r, double x, double y) noexcept {
    const double d2 = (x - r.x) * (x - r.x) + (y - r.y) * (y - r.y);
    if (d2 >= r.radius * r.radius) return 0.0;
    const double sphere = (r.radius * r.radius + r.height * r.height) / (2.0 * r.height);
    return std::max(0.0, std::sqrt(sphere * sphere - d2) - (sphere - r.height));
  }

  TerrainSpec spec_;
  std::vector<Rock> rocks_;
  double phase_x_ = 0.0;
  double phase_y_ = 0.0;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

inline Terrain generate_terrain(const TerrainSpec& spec) { return Terrain(spec); }

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double agl = 10.0;  // meters above base_height
};

enum class NoiseModel { kGaussian, kUniform };

struct TrajectorySpec {
  std::vector<Waypoint> waypoints{{0.0, 0.0, 20.0}, {60.0, 0.0, 10.0}};
  int frame_count = 60;
  CameraModel camera{320.0, 8.0, 0.5};
  int image_cols = 480;
  int image_rows = 360;
  int pixel_stride = 2;
  bool jitter = true;     // per-frame sub-stride pixel offsets
  double pitch_deg = 0.0; // rotation about the x axis; 0 = nadir
  NoiseModel noise = NoiseModel::kGaussian;
  std::uint64_t seed = 7;

  void validate() const {
    if (waypoints.empty()) throw ConfigError("trajectory needs at least one waypoint");
    for (const auto& w : waypoints)
      if (!(w.agl > 0.0)) throw ConfigError("waypoint altitude must be positive");
    if (frame_count < 1) throw ConfigError("frame_count must be >= 1");
    if (image_cols < 1 || image_rows < 1 || pixel_stride < 1) throw ConfigError("bad image grid");
    camera.validate();
  }
};

struct CameraPose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double pitch_deg = 0.0;
};

struct Frame {
  long id = 0;
  CameraPose pose;
  CameraModel camera;
  std::vector<Measurement> points;
};

/// Camera pose of frame `i`: linear interpolation along the waypoints.
inline CameraPose frame_pose(const TrajectorySpec& traj, const Terrain& terrain, int i) {
  const auto& w = traj.waypoints;
  Waypoint p = w.front();
  if (w.size() > 1 && traj.frame_count > 1) {
    const double t = static_cast<double>(i) / (traj.frame_count - 1) * static_cast<double>(w.size() - 1);
    const std::size_t seg = std::min(static_cast<std::size_t>(t), w.size() - 2);
    const double f = t - static_cast<double>(seg);
    p.x = w[seg].x + f * (w[seg + 1].x - w[seg].x);
    p.y = w[seg].y + f * (w[seg + 1].y - w[seg].y);
    p.agl = w[seg].agl + f * (w[seg + 1].agl - w[seg].agl);
  }
  return {p.x, p.y, terrain.spec().base_height + p.agl, traj.pitch_deg};
}

/// Flat 12 x 12 m field of 60 rocks, 0.1-0.3 m in radius and height.
inline TerrainSpec rock_field_terrain(std::uint64_t seed = 1) {
  TerrainSpec s;
  s.seed = seed;
  s.origin_x = -6.0;
  s.origin_y = -6.0;
  s.extent_x = 12.0;
  s.extent_y = 12.0;
  s.undulation_amplitude = 0.0;
  s.rock_count = 60;
  return s;
}

/// Level pass over the rock field at 10 m.
inline TrajectorySpec rock_field_trajectory() {
  TrajectorySpec t;
  t.waypoints = {{-3.0, -1.0, 10.0}, {3.0, 1.0, 10.0}};
  return t;
}

/// Casts the frame's pixel grid onto the terrain and perturbs each depth
/// with zero-mean noise of standard deviation z²·σ_d/(f·b).
inline Frame render_pointcloud(const Terrain& terrain, const TrajectorySpec& traj, int frame_index) {
  Frame frame;
  frame.id = frame_index;
  frame.pose = frame_pose(traj, terrain, frame_index);
  frame.camera = traj.camera;
  const CameraModel& cam = traj.camera;
  std::mt19937_64 rng(traj.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(frame_index) * 0xBF58476D1CE4E5B9ull + 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double pitch = traj.pitch_deg * std::numbers::pi / 180.0;
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double ox = frame.pose.x, oy = frame.pose.y, oz = frame.pose.z;
  const double cx = 0.5 * traj.image_cols, cy = 0.5 * traj.image_rows;
  const double jx = traj.jitter ? unit(rng) * traj.pixel_stride : 0.5 * traj.pixel_stride;
  const double jy = traj.jitter ? unit(rng) * traj.pixel_stride : 0.5 * traj.pixel_stride;
  // Optical axis (camera z) points down, tilted forward by pitch about x.
  const double ax = 0.0, ay = sp, az = -cp;
  for (double v = jy; v < traj.image_rows; v += traj.pixel_stride)
    for (double u = jx; u < traj.image_cols; u += traj.pixel_stride) {
      const double px = (u - cx) / cam.focal_length;
      const double py = (v - cy) / cam.focal_length;
      // Ray in world frame: camera x -> world x, camera y -> rotated y/z.
      const double dx = px;
      const double dy = py * cp + sp;
      const double dz = py * sp - cp;
      if (!(dz < 0.0)) continue;
      double t = (oz - terrain.ground(ox, oy)) / -dz;
      double x = ox + t * dx, y = oy + t * dy;
      for (int k = 0; k < 12; ++k) {
        const double next = (oz - terrain.height(x, y)) / -dz;
        if (!(next > 0.0)) break;
        const bool done = std::abs(next - t) < 1e-9;
        t = next;
        x = ox + t * dx;
        y = oy + t * dy;
        if (done) break;
      }
      const double h = terrain.height(x, y);
      const double z = (x - ox) * ax + (y - oy) * ay + (h - oz) * az;
      if (!(z > 0.0)) continue;
      const double sigma = depth_sigma(z, cam);
      double n = 0.0;
      if (sigma > 0.0) {
        n = traj.noise == NoiseModel::kGaussian ? sigma * normal(rng)
                                                : sigma * std::sqrt(3.0) * (2.0 * unit(rng) - 1.0);
      }
      const double s = n / z;  // relative stretch along the ray
      Measurement m;
      m.world_x = x + s * (x - ox);
      m.world_y = y + s * (y - oy);
      m.height = h + s * (h - oz);
      m.depth = z + n;
      if (!(m.depth > 0.0)) continue;
      m.variance = measurement_variance(m.depth, cam);
      if (!(m.variance > 0.0)) m.variance = std::numeric_limits<double>::min();
      frame.points.push_back(m);
    }
  return frame;
}

// ---------------------------------------------------------------------------
// Frame files

namespace detail {

inline std::string fmt_g(double v, int precision = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline bool get_f64(std::istream& is, double& v) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  std::memcpy(&v, &bits, sizeof v);
  return true;
}

}  // namespace detail

/// CSV frame:
///   frame_id,<id>
///   pose,<x>,<y>,<z>,<pitch_deg>
///   camera,<f>,<b>,<sigma_d>
///   points,<n>
///   world_x,world_y,height,depth,variance
///   <n records>
inline void write_frame_csv(std::ostream& os, const Frame& f) {
  using detail::fmt_g;
  os << "frame_id," << f.id << '\n'
     << "pose," << fmt_g(f.pose.x) << ',' << fmt_g(f.pose.y) << ',' << fmt_g(f.pose.z) << ',' << fmt_g(f.pose.pitch_deg) << '\n'
     << "camera," << fmt_g(f.camera.focal_length) << ',' << fmt_g(f.camera.baseline) << ','
     << fmt_g(f.camera.disparity_noise) << '\n'
     << "points," << f.points.size() << '\n'
     << "world_x,world_y,height,depth,variance\n";
  for (const auto& m : f.points)
    os << fmt_g(m.world_x) << ',' << fmt_g(m.world_y) << ',' << fmt_g(m.height) << ',' << fmt_g(m.depth) << ','
       << fmt_g(m.variance) << '\n';
}

namespace detail {

inline std::size_t record_count(double v) {
  if (!(v >= 0.0 && v <= 9007199254740992.0) || v != std::floor(v)) throw FormatError("frame: bad point count");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Reads a CSV frame. Malformed point records are skipped and counted in
/// `*bad_records` unless `strict`, in which case FormatError is thrown.
inline Frame read_frame_csv(std::istream& is, bool strict = true, std::size_t* bad_records = nullptr) {
  Frame f;
  std::string line;
  auto fields = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
  };
  auto num = [](const std::string& s, double& v) {
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    return end != s.c_str() && *end == '\0';
  };
  auto header = [&](const char* key, std::size_t n) {
    if (!std::getline(is, line)) throw FormatError(std::string("frame: missing ") + key + " line");
    auto v = fields(line);
    if (v.size() != n + 1 || v[0] != key) throw FormatError(std::string("frame: malformed ") + key + " line");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
      if (!num(v[i + 1], out[i])) throw FormatError(std::string("frame: bad number in ") + key + " line");
    return out;
  };
  f.id = static_cast<long>(header("frame_id", 1)[0]);
  const auto pose = header("pose", 4);
  f.pose = {pose[0], pose[1], pose[2], pose[3]};
  const auto cam = header("camera", 3);
  f.camera = {cam[0], cam[1], cam[2]};
  const auto count = header("points", 1);
  if (!std::getline(is, line) || line != "world_x,world_y,height,depth,variance")
    throw FormatError("frame: missing point column header");
  const auto n = detail::record_count(count[0]);
  f.points.reserve(std::min<std::size_t>(n, std::size_t{1} << 20));
  std::size_t bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(is, line)) {
      if (strict) throw FormatError("frame: fewer point records than declared");
      bad += n - i;
      break;
    }
    auto v = fields(line);
    Measurement m;
    bool ok = v.size() == 5 && num(v[0], m.world_x) && num(v[1], m.world_y) && num(v[2], m.height) &&
              num(v[3], m.depth) && num(v[4], m.variance);
    if (!ok) {
      if (strict) throw FormatError("frame: malformed point record " + std::to_string(i));
      ++bad;
      continue;
    }
    f.points.push_back(m);
  }
  if (bad_records) *bad_records = bad;
  return f;
}

inline constexpr char kFrameMagic[8] = {'O', 'M', 'G', 'F', 'R', 'M', '1', '\0'};

/// Packed binary frame: 8-byte magic, then little-endian f64 fields
/// id, x, y, z, pitch, f, b, sigma_d, count, followed by count records of
/// world_x, world_y, height, depth, variance.
inline void write_frame_binary(std::ostream& os, const Frame& f) {
  os.write(kFrameMagic, sizeof kFrameMagic);
  for (double v : {static_cast<double>(f.id), f.pose.x, f.pose.y, f.pose.z, f.pose.pitch_deg, f.camera.focal_length,
                   f.camera.baseline, f.camera.disparity_noise, static_cast<double>(f.points.size())})
    detail::put_f64(os, v);
  for (const auto& m : f.points)
    for (double v : {m.world_x, m.world_y, m.height, m.depth, m.variance}) detail::put_f64(os, v);
}

inline Frame read_frame_binary(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kFrameMagic, 8) != 0) throw FormatError("binary frame: bad magic");
  double h[9];
  for (double& v : h)
    if (!detail::get_f64(is, v)) throw FormatError("binary frame: truncated header");
  Frame f;
  f.id = static_cast<long>(h[0]);
  f.pose = {h[1], h[2], h[3], h[4]};
  f.camera = {h[5], h[6], h[7]};
  const auto n = detail::record_count(h[8]);
  f.points.reserve(std::min<std::size_t>(n, std::size_t{1} << 20));
  for (std::size_t i = 0; i < n; ++i) {
    double v[5];
    for (double& x : v)
      if (!detail::get_f64(is, x)) throw FormatError("binary frame: truncated payload");
    f.points.push_back({v[0], v[1], v[2], v[3], v[4]});
  }
  return f;
}

}  // namespace omgmap
