#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hexatrack/error.hpp"

namespace hexatrack {

constexpr int kFrameWidth = 640;
constexpr int kFrameHeight = 480;

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct PixelCoord {
  int x = 0;
  int y = 0;

  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
  friend auto operator<=>(const PixelCoord& a, const PixelCoord& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;

  double norm() const { return std::hypot(x, y); }
};

/// Axis-aligned box in pixel units; (x, y) is the top-left corner.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  Vec2 center() const { return {x + 0.5 * w, y + 0.5 * h}; }
  double area() const { return std::max(0.0, w) * std::max(0.0, h); }

  static Box from_center(Vec2 c, double w, double h) { return {c.x - 0.5 * w, c.y - 0.5 * h, w, h}; }

  friend bool operator==(const Box&, const Box&) = default;
};

inline double intersection_area(const Box& a, const Box& b) {
  const double x0 = std::max(a.x, b.x);
  const double y0 = std::max(a.y, b.y);
  const double x1 = std::min(a.x + a.w, b.x + b.w);
  const double y1 = std::min(a.y + a.h, b.y + b.h);
  return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
}

inline double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

struct GrayTag {};
struct BinaryTag {};
struct ColorTag {};

/// Row-major raster. The tag keeps grayscale and binary images from
/// silently converting into each other.
template <typename Pixel, typename Tag>
class Image {
 public:
  using pixel_type = Pixel;

  Image() = default;
  Image(int width, int height, Pixel fill = Pixel{}) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw Error(Errc::invalid_parameter, "image dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  Pixel& at(int x, int y) { return data_[index(x, y)]; }
  const Pixel& at(int x, int y) const { return data_[index(x, y)]; }

  Pixel clamped(int x, int y) const {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return data_[index(x, y)];
  }

  std::span<Pixel> pixels() noexcept { return data_; }
  std::span<const Pixel> pixels() const noexcept { return data_; }

  std::span<Pixel> row(int y) { return std::span<Pixel>(data_).subspan(index(0, y), width_); }
  std::span<const Pixel> row(int y) const {
    return std::span<const Pixel>(data_).subspan(index(0, y), width_);
  }

  bool same_shape(const auto& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Pixel> data_;
};

using GrayImage = Image<std::uint8_t, GrayTag>;
/// Every value is exactly 0 or 255.
using BinaryImage = Image<std::uint8_t, BinaryTag>;

/// Color frame with its sequence number n.
class Frame : public Image<Rgb, ColorTag> {
 public:
  Frame() = default;
  Frame(int width, int height, Rgb fill = {}, std::int64_t index = 0)
      : Image<Rgb, ColorTag>(width, height, fill), index_(index) {}

  std::int64_t index() const noexcept { return index_; }
  void set_index(std::int64_t n) noexcept { index_ = n; }

  friend bool operator==(const Frame& a, const Frame& b) {
    return a.index_ == b.index_ &&
           static_cast<const Image<Rgb, ColorTag>&>(a) == static_cast<const Image<Rgb, ColorTag>&>(b);
  }

 private:
  std::int64_t index_ = 0;
};

template <typename T>
concept Raster = requires(const T& img) {
  typename T::pixel_type;
  { img.width() } -> std::convertible_to<int>;
  { img.height() } -> std::convertible_to<int>;
};

inline void require_same_shape(const auto& a, const auto& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(Errc::dimension_mismatch, what);
  }
}

}  // namespace hexatrack
