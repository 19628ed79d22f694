#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "omgmap/config.hpp"
#include "omgmap/raster_io.hpp"

namespace omgmap::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kConfig = 2, kFormat = 3, kAssertion = 4 };

/// A check that the command promised to enforce did not hold.
class AssertionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// --config FILE plus one --<key> flag per configuration key.
class ConfigOptions {
 public:
  void attach(CLI::App* app) {
    app->add_option("--config", file_, "key=value configuration file");
    for (const auto& k : config_keys()) {
      auto& slot = values_[k.name];
      app->add_option("--" + k.name, slot, k.help)->group("Configuration");
    }
    app_ = app;
  }

  [[nodiscard]] const std::string& file() const noexcept { return file_; }

  /// Entries from `base` (if any), then the config file, then flags.
  [[nodiscard]] std::vector<ConfigEntry> entries(const std::vector<ConfigEntry>& base = {}) const {
    std::vector<ConfigEntry> out = base;
    if (!file_.empty()) {
      auto from_file = read_config_file(file_);
      out.insert(out.end(), from_file.begin(), from_file.end());
    }
    for (const auto& k : config_keys()) {
      if (app_->count("--" + k.name) == 0) continue;
      out.push_back({k.name, values_.at(k.name), "--" + k.name});
    }
    return out;
  }

  [[nodiscard]] RunConfig resolve(const std::vector<ConfigEntry>& base = {}) const { return resolve_config(entries(base)); }

 private:
  CLI::App* app_ = nullptr;
  std::string file_;
  std::map<std::string, std::string> values_;
};

inline void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create directory " + p.string() + ": " + ec.message());
}

inline std::ofstream open_out(const fs::path& p, bool binary = false) {
  std::ofstream os(p, binary ? std::ios::binary : std::ios::out);
  if (!os) throw std::runtime_error("cannot open " + p.string() + " for writing");
  return os;
}

inline void write_config_file(const fs::path& p, const RunConfig& cfg) {
  auto os = open_out(p);
  write_config(os, cfg);
}

inline std::string frame_name(long id, const std::string& ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "frame_%04ld%s", id, ext.c_str());
  return buf;
}

/// Frame files of a dataset directory (or its frames/ subdirectory), by name.
inline std::vector<fs::path> list_frames(const fs::path& dir) {
  fs::path root = fs::is_directory(dir / "frames") ? dir / "frames" : dir;
  if (!fs::is_directory(root)) throw FormatError("frame directory not found: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    const auto stem = e.path().stem().string();
    if (stem.rfind("frame_", 0) == 0 && (ext == ".csv" || ext == ".bin")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline Frame read_frame_file(const fs::path& p, bool strict, std::size_t* bad_records) {
  if (p.extension() == ".bin") {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw FormatError("cannot open " + p.string());
    return read_frame_binary(is);
  }
  std::ifstream is(p);
  if (!is) throw FormatError("cannot open " + p.string());
  return read_frame_csv(is, strict, bad_records);
}

inline std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline RasterHeader map_header(const PyramidMap& map, int layer, std::string channel) {
  return {0, 0, map.resolution(layer), map.origin_x(), map.origin_y(), layer, std::move(channel)};
}

template <typename T>
Raster<float> to_float(const Raster<T>& r) {
  Raster<float> out(r.width(), r.height());
  for (std::size_t i = 0; i < r.size(); ++i) out.data()[i] = static_cast<float>(r.data()[i]);
  return out;
}

void add_simulate(CLI::App& app);
void add_run(CLI::App& app);
void add_bench(CLI::App& app);
void add_eval(CLI::App& app);

}  // namespace omgmap::cli
