#pragma once

// 8-bit binary PGM (P5). Intensities map 0..maxval <-> [0, 1].

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "fusebench/error.hpp"
#include "fusebench/geometry.hpp"

namespace fusebench {

namespace detail {

inline int read_pgm_int(std::istream& is, const std::string& source) {
  int c = is.peek();
  while (c != EOF) {
    if (c == '#') {
      std::string comment;
      std::getline(is, comment);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
    c = is.peek();
  }
  int v = 0;
  if (!(is >> v) || v < 0) throw IngestError(source + ": malformed PGM header");
  return v;
}

}  // namespace detail

inline GrayImage read_pgm(std::istream& is, const std::string& source) {
  char magic[2] = {0, 0};
  is.read(magic, 2);
  if (!is || magic[0] != 'P' || magic[1] != '5') throw IngestError(source + ": not a binary PGM (P5) file");
  const int w = detail::read_pgm_int(is, source);
  const int h = detail::read_pgm_int(is, source);
  const int maxval = detail::read_pgm_int(is, source);
  if (w < 1 || h < 1) throw IngestError(source + ": PGM dimensions must be >= 1");
  if (maxval < 1 || maxval > 255) throw IngestError(source + ": only 8-bit PGM is supported");
  is.get();  // single whitespace before the raster
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (is.gcount() != static_cast<std::streamsize>(raw.size())) throw IngestError(source + ": truncated PGM raster");
  std::vector<double> px(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) px[i] = static_cast<double>(raw[i]) / maxval;
  return GrayImage(w, h, std::move(px));
}

inline void write_pgm(std::ostream& os, const GrayImage& img) {
  os << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> raw(img.pixels().size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(img.pixels()[i], 0.0, 1.0);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestError(path.string() + ": cannot open image");
  return read_pgm(is, path.string());
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IngestError(path.string() + ": cannot open for writing");
  write_pgm(os, img);
  if (!os) throw IngestError(path.string() + ": write failed");
}

}  // namespace fusebench
