#pragma once

// DEMR1 raster container.
//
//   DEMR1 <width> <height> <resolution> <origin_x> <origin_y> <layer> <channel>\n
//   <width*height float32, little endian, row-major, row 0 at origin_y>
//
// Empty / undefined cells are quiet NaN.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "omgmap/raster.hpp"

namespace omgmap {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RasterHeader {
  int width = 0;
  int height = 0;
  double resolution = 0.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  int layer = 0;
  std::string channel = "mean";
};

namespace detail {

inline std::uint32_t to_little_endian(std::uint32_t v) noexcept {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline void write_demr1(std::ostream& os, RasterHeader header, const Raster<float>& raster) {
  header.width = raster.width();
  header.height = raster.height();
  if (header.channel.empty() || header.channel.find_first_of(" \t\n") != std::string::npos)
    throw FormatError("DEMR1 channel name must be a single token");
  os << "DEMR1 " << header.width << ' ' << header.height << ' ' << detail::format_double(header.resolution)
     << ' ' << detail::format_double(header.origin_x) << ' ' << detail::format_double(header.origin_y) << ' '
     << header.layer << ' ' << header.channel << '\n';
  for (float f : raster.data()) {
    std::uint32_t bits = 0;
    if (std::isnan(f)) f = kNaN;
    std::memcpy(&bits, &f, sizeof bits);
    bits = detail::to_little_endian(bits);
    os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!os) throw FormatError("DEMR1 write failed");
}

inline void write_demr1(const std::string& path, const RasterHeader& header, const Raster<float>& raster) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_demr1(os, header, raster);
}

inline Raster<float> read_demr1(std::istream& is, RasterHeader* header_out = nullptr) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("DEMR1: missing header");
  std::istringstream hs(line);
  std::string magic;
  RasterHeader h;
  hs >> magic >> h.width >> h.height >> h.resolution >> h.origin_x >> h.origin_y >> h.layer >> h.channel;
  if (magic != "DEMR1") throw FormatError("DEMR1: bad magic '" + magic + "'");
  if (!hs || h.width < 0 || h.height < 0) throw FormatError("DEMR1: malformed header");
  Raster<float> out(h.width, h.height);
  for (float& f : out.data()) {
    std::uint32_t bits = 0;
    if (!is.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw FormatError("DEMR1: truncated payload");
    bits = detail::to_little_endian(bits);
    std::memcpy(&f, &bits, sizeof f);
  }
  if (header_out) *header_out = h;
  return out;
}

inline Raster<float> read_demr1(const std::string& path, RasterHeader* header_out = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_demr1(is, header_out);
}

}  // namespace omgmap
