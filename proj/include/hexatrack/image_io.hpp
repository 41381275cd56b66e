#pragma once

// PGM/PPM/PNG file access and simple overlay drawing.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hexatrack/error.hpp"
#include "hexatrack/image.hpp"

namespace hexatrack::io {

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& header,
                       const void* data, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot open for writing: " + path.string());
  out << header;
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

// Reads a binary netpbm header ("P5"/"P6"), returning the stream positioned
// at the first pixel byte.
inline std::ifstream open_netpbm(const std::filesystem::path& path, const char* magic, int& width,
                                 int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open: " + path.string());
  auto next_token = [&in]() {
    std::string tok;
    char c = 0;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  if (next_token() != magic) throw Error(Errc::io_error, "bad magic in " + path.string());
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    if (std::stoi(next_token()) != 255) throw Error(Errc::io_error, "only maxval 255 supported");
  } catch (const std::logic_error&) {
    throw Error(Errc::io_error, "malformed header in " + path.string());
  }
  if (width <= 0 || height <= 0) throw Error(Errc::io_error, "bad dimensions in " + path.string());
  return in;
}

}  // namespace detail

inline void write_pgm(const std::filesystem::path& path, const GrayImage& g) {
  std::ostringstream header;
  header << "P5\n" << g.width() << ' ' << g.height() << "\n255\n";
  detail::write_file(path, header.str(), g.pixels().data(), g.size());
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
  int w = 0;
  int h = 0;
  auto in = detail::open_netpbm(path, "P5", w, h);
  GrayImage g(w, h);
  in.read(reinterpret_cast<char*>(g.pixels().data()), static_cast<std::streamsize>(g.size()));
  if (in.gcount() != static_cast<std::streamsize>(g.size())) {
    throw Error(Errc::io_error, "truncated PGM: " + path.string());
  }
  return g;
}

inline void write_ppm(const std::filesystem::path& path, const Frame& f) {
  static_assert(sizeof(Rgb) == 3);
  std::ostringstream header;
  header << "P6\n" << f.width() << ' ' << f.height() << "\n255\n";
  detail::write_file(path, header.str(), f.pixels().data(), f.size() * 3);
}

inline Frame read_ppm(const std::filesystem::path& path) {
  int w = 0;
  int h = 0;
  auto in = detail::open_netpbm(path, "P6", w, h);
  Frame f(w, h);
  in.read(reinterpret_cast<char*>(f.pixels().data()), static_cast<std::streamsize>(f.size() * 3));
  if (in.gcount() != static_cast<std::streamsize>(f.size() * 3)) {
    throw Error(Errc::io_error, "truncated PPM: " + path.string());
  }
  return f;
}

inline std::vector<std::uint8_t> encode_png(const Frame& f) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(f.width());
  image.height = static_cast<png_uint_32>(f.height());
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, f.pixels().data(), 0, nullptr)) {
    throw Error(Errc::io_error, std::string("png sizing failed: ") + image.message);
  }
  std::vector<std::uint8_t> buf(size);
  if (!png_image_write_to_memory(&image, buf.data(), &size, 0, f.pixels().data(), 0, nullptr)) {
    throw Error(Errc::io_error, std::string("png encode failed: ") + image.message);
  }
  buf.resize(size);
  return buf;
}

inline void write_png(const std::filesystem::path& path, const Frame& f) {
  const auto bytes = encode_png(f);
  detail::write_file(path, {}, bytes.data(), bytes.size());
}

inline Frame read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw Error(Errc::io_error, "cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Frame f(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, f.pixels().data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(Errc::io_error, "PNG decode failed for " + path.string() + ": " + image.message);
  }
  return f;
}

/// Loads a color frame by extension (.ppm or .png).
inline Frame read_frame(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".ppm") return read_ppm(path);
  if (ext == ".png") return read_png(path);
  throw Error(Errc::io_error, "unsupported frame format: " + path.string());
}

inline void draw_rect(Frame& f, const Box& box, Rgb color, int thickness = 2) {
  const int x0 = static_cast<int>(std::floor(box.x));
  const int y0 = static_cast<int>(std::floor(box.y));
  const int x1 = static_cast<int>(std::ceil(box.x + box.w)) - 1;
  const int y1 = static_cast<int>(std::ceil(box.y + box.h)) - 1;
  for (int t = 0; t < thickness; ++t) {
    for (int x = x0; x <= x1; ++x) {
      if (f.contains(x, y0 + t)) f.at(x, y0 + t) = color;
      if (f.contains(x, y1 - t)) f.at(x, y1 - t) = color;
    }
    for (int y = y0; y <= y1; ++y) {
      if (f.contains(x0 + t, y)) f.at(x0 + t, y) = color;
      if (f.contains(x1 - t, y)) f.at(x1 - t, y) = color;
    }
  }
}

inline void draw_line(Frame& f, int x0, int y0, int x1, int y1, Rgb color) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    if (f.contains(x0, y0)) f.at(x0, y0) = color;
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

inline constexpr Rgb kGreen{0, 255, 0};
inline constexpr Rgb kRed{255, 0, 0};

}  // namespace hexatrack::io
