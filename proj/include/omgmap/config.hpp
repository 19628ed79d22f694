#pragma once

// Flat key=value run configuration. Files are read first, command-line
// overrides after; the last assignment of a key wins.

#include <charconv>
#include <cmath>
#include <limits>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "omgmap/pipeline.hpp"
#include "omgmap/synth.hpp"

namespace omgmap {

enum class Scene { kFlight, kRockField };

struct RunConfig {
  PipelineConfig pipeline;
  Scene scene = Scene::kFlight;
  TerrainSpec terrain;
  TrajectorySpec trajectory;
  std::string frame_format = "bin";  // csv | bin
  int threads = 1;
  bool strict = false;
  bool min_distance_explicit = false;

  /// Landing radius drives both segmentation and detection; the rejection
  /// floor follows it unless set on its own.
  void set_landing_radius(double r) {
    pipeline.seg.landing_radius = r;
    pipeline.detect.landing_radius = r;
    if (!min_distance_explicit) pipeline.detect.min_distance = r;
  }

  void validate() const {
    pipeline.validate();
    trajectory.validate();
    if (pipeline.seg.landing_radius != pipeline.detect.landing_radius)
      throw ConfigError("landing radius differs between segmentation and detection");
    if (!(terrain.extent_x > 0.0 && terrain.extent_y > 0.0)) throw ConfigError("terrain extent must be positive");
    if (terrain.rock_count < 0) throw ConfigError("rocks must be >= 0");
    if (!(terrain.rock_radius_min > 0.0 && terrain.rock_radius_min <= terrain.rock_radius_max))
      throw ConfigError("need 0 < rock-radius-min <= rock-radius-max");
    if (!(terrain.rock_height_min > 0.0 && terrain.rock_height_min <= terrain.rock_height_max))
      throw ConfigError("need 0 < rock-height-min <= rock-height-max");
    if (2.0 * terrain.rock_radius_max > std::min(terrain.extent_x, terrain.extent_y))
      throw ConfigError("rocks do not fit inside the terrain extent");
    if (!(terrain.undulation_wavelength > 0.0)) throw ConfigError("wavelength must be positive");
    if (!(terrain.raster_resolution > 0.0)) throw ConfigError("truth-res must be positive");
    if (threads != 1 && threads != 2) throw ConfigError("threads must be 1 or 2");
    if (frame_format != "csv" && frame_format != "bin") throw ConfigError("format must be csv or bin");
  }
};

/// Applies a scene preset; keys set afterwards refine it.
inline void apply_scene(RunConfig& cfg, Scene scene) {
  cfg.scene = scene;
  if (scene == Scene::kRockField) {
    cfg.terrain = rock_field_terrain(cfg.terrain.seed);
    cfg.trajectory = rock_field_trajectory();
    cfg.pipeline.pyramid.map_size = 12.0;
  } else {
    const auto seed = cfg.terrain.seed;
    cfg.terrain = TerrainSpec{};
    cfg.terrain.seed = seed;
    cfg.trajectory = TrajectorySpec{};
    cfg.pipeline.pyramid.map_size = PyramidConfig{}.map_size;
  }
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out)) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

inline long long parse_int(const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

inline int parse_int32(const std::string& v) {
  const long long x = parse_int(v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ConfigError("integer out of range: '" + v + "'");
  return static_cast<int>(x);
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

// Shortest text that reads back to the same double.
inline std::string fmt_num(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, p) : fmt_g(v);
}

}  // namespace detail

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

/// Every recognised key, in echo order.
inline const std::vector<ConfigKey>& config_keys() {
  using namespace detail;
  auto dbl = [](std::string name, std::string help, auto member) {
    return ConfigKey{std::move(name), std::move(help),
                     [member](RunConfig& c, const std::string& v) { member(c) = parse_double(v); },
                     [member](const RunConfig& c) { return fmt_num(member(const_cast<RunConfig&>(c))); }};
  };
  auto integer = [](std::string name, std::string help, auto member) {
    return ConfigKey{std::move(name), std::move(help),
                     [member](RunConfig& c, const std::string& v) { member(c) = parse_int32(v); },
                     [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }};
  };
  auto boolean = [](std::string name, std::string help, auto member) {
    return ConfigKey{std::move(name), std::move(help),
                     [member](RunConfig& c, const std::string& v) { member(c) = parse_bool(v); },
                     [member](const RunConfig& c) {
                       return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false");
                     }};
  };
  static const std::vector<ConfigKey> keys = [&] {
    std::vector<ConfigKey> k;
    k.push_back({"scene", "synthetic scene preset: flight | rockfield",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "flight") apply_scene(c, Scene::kFlight);
                   else if (v == "rockfield") apply_scene(c, Scene::kRockField);
                   else throw ConfigError("scene must be flight or rockfield, got '" + v + "'");
                 },
                 [](const RunConfig& c) { return std::string(c.scene == Scene::kRockField ? "rockfield" : "flight"); }});
    // Mapping.
    k.push_back(integer("layers", "number of pyramid layers", [](RunConfig& c) -> int& { return c.pipeline.pyramid.num_layers; }));
    k.push_back(dbl("base-res", "finest layer resolution, m/cell", [](RunConfig& c) -> double& { return c.pipeline.pyramid.base_resolution; }));
    k.push_back(dbl("map-size", "map side length, m", [](RunConfig& c) -> double& { return c.pipeline.pyramid.map_size; }));
    k.push_back(dbl("first-meas-inflation", "variance factor for a cell's first measurement",
                    [](RunConfig& c) -> double& { return c.pipeline.pyramid.first_measurement_inflation; }));
    k.push_back(boolean("inflation", "inflate every cell after each frame", [](RunConfig& c) -> bool& { return c.pipeline.inflation.enabled; }));
    k.push_back(dbl("inflation-k", "per-frame inflation factor (>= 1)", [](RunConfig& c) -> double& { return c.pipeline.inflation.k; }));
    // Segmentation.
    k.push_back(dbl("roughness-thresh", "roughness threshold, m", [](RunConfig& c) -> double& { return c.pipeline.seg.roughness_threshold; }));
    k.push_back({"landing-radius", "landing radius, m (segmentation and detection)",
                 [](RunConfig& c, const std::string& v) { c.set_landing_radius(parse_double(v)); },
                 [](const RunConfig& c) { return fmt_num(c.pipeline.seg.landing_radius); }});
    k.push_back(dbl("search-radius", "roughness search radius, m",
                    [](RunConfig& c) -> double& { return c.pipeline.seg.roughness_search_radius; }));
    k.push_back(dbl("slope-thresh", "slope threshold, degrees", [](RunConfig& c) -> double& { return c.pipeline.seg.slope_threshold; }));
    k.push_back(boolean("rolling", "rolling-buffer roughness (false = naive)", [](RunConfig& c) -> bool& { return c.pipeline.seg.use_rolling; }));
    // Detection.
    k.push_back(integer("max-peaks", "maximum distance-transform peaks", [](RunConfig& c) -> int& { return c.pipeline.detect.max_peaks; }));
    k.push_back(integer("shift-iters", "mean-shift iterations", [](RunConfig& c) -> int& { return c.pipeline.detect.shift_iterations; }));
    k.push_back(dbl("w-rough", "kernel weight of roughness", [](RunConfig& c) -> double& { return c.pipeline.detect.weight_roughness; }));
    k.push_back(dbl("w-dist", "kernel weight of inverse distance", [](RunConfig& c) -> double& { return c.pipeline.detect.weight_distance; }));
    k.push_back(dbl("w-sigma", "kernel weight of uncertainty", [](RunConfig& c) -> double& { return c.pipeline.detect.weight_uncertainty; }));
    k.push_back(dbl("peak-factor", "peaks below this fraction of the largest are dropped",
                    [](RunConfig& c) -> double& { return c.pipeline.detect.peak_factor; }));
    k.push_back({"min-distance", "minimum candidate clearance, m",
                 [](RunConfig& c, const std::string& v) {
                   c.pipeline.detect.min_distance = parse_double(v);
                   c.min_distance_explicit = true;
                 },
                 [](const RunConfig& c) { return fmt_num(c.pipeline.detect.min_distance); }});
    // Camera.
    k.push_back(dbl("focal", "focal length, px", [](RunConfig& c) -> double& { return c.trajectory.camera.focal_length; }));
    k.push_back(dbl("baseline", "stereo baseline, m", [](RunConfig& c) -> double& { return c.trajectory.camera.baseline; }));
    k.push_back(dbl("disparity-noise", "disparity noise sigma, px", [](RunConfig& c) -> double& { return c.trajectory.camera.disparity_noise; }));
    // Terrain.
    k.push_back({"seed", "terrain seed",
                 [](RunConfig& c, const std::string& v) {
                   const long long s = parse_int(v);
                   if (s < 0) throw ConfigError("seed must be non-negative");
                   c.terrain.seed = static_cast<std::uint64_t>(s);
                 },
                 [](const RunConfig& c) { return std::to_string(c.terrain.seed); }});
    k.push_back(dbl("origin-x", "terrain lower-left x, m", [](RunConfig& c) -> double& { return c.terrain.origin_x; }));
    k.push_back(dbl("origin-y", "terrain lower-left y, m", [](RunConfig& c) -> double& { return c.terrain.origin_y; }));
    k.push_back(dbl("extent-x", "terrain extent along x, m", [](RunConfig& c) -> double& { return c.terrain.extent_x; }));
    k.push_back(dbl("extent-y", "terrain extent along y, m", [](RunConfig& c) -> double& { return c.terrain.extent_y; }));
    k.push_back(dbl("undulation", "ground undulation amplitude, m", [](RunConfig& c) -> double& { return c.terrain.undulation_amplitude; }));
    k.push_back(dbl("wavelength", "ground undulation wavelength, m", [](RunConfig& c) -> double& { return c.terrain.undulation_wavelength; }));
    k.push_back(integer("rocks", "number of random rocks", [](RunConfig& c) -> int& { return c.terrain.rock_count; }));
    k.push_back(dbl("rock-radius-min", "m", [](RunConfig& c) -> double& { return c.terrain.rock_radius_min; }));
    k.push_back(dbl("rock-radius-max", "m", [](RunConfig& c) -> double& { return c.terrain.rock_radius_max; }));
    k.push_back(dbl("rock-height-min", "m", [](RunConfig& c) -> double& { return c.terrain.rock_height_min; }));
    k.push_back(dbl("rock-height-max", "m", [](RunConfig& c) -> double& { return c.terrain.rock_height_max; }));
    k.push_back(dbl("truth-res", "ground-truth raster resolution, m", [](RunConfig& c) -> double& { return c.terrain.raster_resolution; }));
    // Trajectory.
    k.push_back({"waypoints", "x:y:agl triples separated by ';'",
                 [](RunConfig& c, const std::string& v) {
                   std::vector<Waypoint> w;
                   std::stringstream ss(v);
                   std::string item;
                   while (std::getline(ss, item, ';')) {
                     item = trim(item);
                     if (item.empty()) continue;
                     std::stringstream is(item);
                     std::string a, b, z;
                     if (!std::getline(is, a, ':') || !std::getline(is, b, ':') || !std::getline(is, z) ||
                         z.find(':') != std::string::npos)
                       throw ConfigError("waypoint must be x:y:agl, got '" + item + "'");
                     w.push_back({parse_double(trim(a)), parse_double(trim(b)), parse_double(trim(z))});
                   }
                   if (w.empty()) throw ConfigError("waypoints is empty");
                   c.trajectory.waypoints = std::move(w);
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (const auto& w : c.trajectory.waypoints) {
                     if (!s.empty()) s += ';';
                     s += fmt_num(w.x) + ':' + fmt_num(w.y) + ':' + fmt_num(w.agl);
                   }
                   return s;
                 }});
    k.push_back(integer("frame-count", "number of frames", [](RunConfig& c) -> int& { return c.trajectory.frame_count; }));
    k.push_back(integer("image-cols", "image width, px", [](RunConfig& c) -> int& { return c.trajectory.image_cols; }));
    k.push_back(integer("image-rows", "image height, px", [](RunConfig& c) -> int& { return c.trajectory.image_rows; }));
    k.push_back(integer("pixel-stride", "sample every n-th pixel", [](RunConfig& c) -> int& { return c.trajectory.pixel_stride; }));
    k.push_back(boolean("jitter", "per-frame sub-stride pixel offsets", [](RunConfig& c) -> bool& { return c.trajectory.jitter; }));
    k.push_back(dbl("pitch", "camera pitch, degrees", [](RunConfig& c) -> double& { return c.trajectory.pitch_deg; }));
    k.push_back({"noise", "depth noise model: gaussian | uniform",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "gaussian") c.trajectory.noise = NoiseModel::kGaussian;
                   else if (v == "uniform") c.trajectory.noise = NoiseModel::kUniform;
                   else throw ConfigError("noise must be gaussian or uniform, got '" + v + "'");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.trajectory.noise == NoiseModel::kUniform ? "uniform" : "gaussian");
                 }});
    k.push_back({"noise-seed", "depth noise seed",
                 [](RunConfig& c, const std::string& v) {
                   const long long s = parse_int(v);
                   if (s < 0) throw ConfigError("noise-seed must be non-negative");
                   c.trajectory.seed = static_cast<std::uint64_t>(s);
                 },
                 [](const RunConfig& c) { return std::to_string(c.trajectory.seed); }});
    k.push_back({"format", "frame file format: csv | bin",
                 [](RunConfig& c, const std::string& v) { c.frame_format = v; },
                 [](const RunConfig& c) { return c.frame_format; }});
    // Execution.
    k.push_back(integer("threads", "1 or 2 (analysis on a second thread)", [](RunConfig& c) -> int& { return c.threads; }));
    k.push_back(boolean("strict", "abort on malformed frames instead of skipping", [](RunConfig& c) -> bool& { return c.strict; }));
    return k;
  }();
  return keys;
}

inline const ConfigKey* find_config_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

struct ConfigEntry {
  std::string key;
  std::string value;
  std::string where;  // "file:line" or "--flag"
};

/// Parses key=value lines. '#' starts a comment; blank lines are ignored.
inline std::vector<ConfigEntry> parse_config_text(std::istream& is, const std::string& source) {
  std::vector<ConfigEntry> out;
  std::string line;
  int no = 0;
  while (std::getline(is, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
    ConfigEntry e{detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), where};
    if (e.key.empty()) throw ConfigError(where + ": empty key");
    if (!find_config_key(e.key)) throw ConfigError(where + ": unknown key '" + e.key + "'");
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<ConfigEntry> read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  return parse_config_text(is, path);
}

/// Resolves entries on top of the defaults. Scene presets go first so that
/// the remaining keys refine them; otherwise the last assignment wins.
inline RunConfig resolve_config(const std::vector<ConfigEntry>& entries) {
  RunConfig cfg;
  auto apply = [&](const ConfigEntry& e) {
    const ConfigKey* key = find_config_key(e.key);
    if (!key) throw ConfigError(e.where + ": unknown key '" + e.key + "'");
    try {
      key->set(cfg, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError(e.where + ": " + e.key + ": " + err.what());
    }
  };
  for (const auto& e : entries)
    if (e.key == "scene") apply(e);
  // Landing radius before min-distance keeps "min-distance follows" order independent.
  for (const auto& e : entries)
    if (e.key == "landing-radius") apply(e);
  for (const auto& e : entries)
    if (e.key != "scene" && e.key != "landing-radius") apply(e);
  cfg.validate();
  return cfg;
}

/// Fully resolved echo; reading it back reproduces the configuration.
inline void write_config(std::ostream& os, const RunConfig& cfg) {
  for (const auto& k : config_keys()) {
    if (k.name == "min-distance" && !cfg.min_distance_explicit) {
      os << "# min-distance follows landing-radius: " << k.get(cfg) << '\n';
      continue;
    }
    os << k.name << " = " << k.get(cfg) << '\n';
  }
}

}  // namespace omgmap
