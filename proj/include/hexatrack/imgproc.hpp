#pragma once

// Raster primitives used by the detection pipeline.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hexatrack/error.hpp"
#include "hexatrack/image.hpp"

namespace hexatrack {

/// HSV with every component scaled to [0, 255] (hue maps [0, 360) onto it).
struct HsvColor {
  double h = 0.0;
  double s = 0.0;
  double v = 0.0;

  friend bool operator==(const HsvColor&, const HsvColor&) = default;
};

inline std::uint8_t luma(Rgb p) {
  const double y = 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
  return static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
}

inline GrayImage to_grayscale(const Frame& f) {
  GrayImage out(f.width(), f.height());
  auto src = f.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = luma(src[i]);
  return out;
}

inline HsvColor rgb_to_hsv(Rgb p) {
  const double r = p.r / 255.0;
  const double g = p.g / 255.0;
  const double b = p.b / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;

  double hue_deg = 0.0;
  if (delta > 0.0) {
    if (mx == r) {
      hue_deg = 60.0 * std::fmod((g - b) / delta, 6.0);
    } else if (mx == g) {
      hue_deg = 60.0 * ((b - r) / delta + 2.0);
    } else {
      hue_deg = 60.0 * ((r - g) / delta + 4.0);
    }
    if (hue_deg < 0.0) hue_deg += 360.0;
  }
  const double sat = mx > 0.0 ? delta / mx : 0.0;
  return {hue_deg / 360.0 * 255.0, sat * 255.0, mx * 255.0};
}

inline Rgb hsv_to_rgb(const HsvColor& c) {
  const double hue_deg = std::fmod(std::clamp(c.h, 0.0, 255.0) / 255.0 * 360.0, 360.0);
  const double s = std::clamp(c.s, 0.0, 255.0) / 255.0;
  const double v = std::clamp(c.v, 0.0, 255.0) / 255.0;
  const double chroma = v * s;
  const double hp = hue_deg / 60.0;
  const double x = chroma * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  std::array<double, 3> rgb{};
  switch (static_cast<int>(hp)) {
    case 0: rgb = {chroma, x, 0}; break;
    case 1: rgb = {x, chroma, 0}; break;
    case 2: rgb = {0, chroma, x}; break;
    case 3: rgb = {0, x, chroma}; break;
    case 4: rgb = {x, 0, chroma}; break;
    default: rgb = {chroma, 0, x}; break;
  }
  const double m = v - chroma;
  auto to8 = [m](double u) {
    return static_cast<std::uint8_t>(std::clamp(std::lround((u + m) * 255.0), 0L, 255L));
  };
  return {to8(rgb[0]), to8(rgb[1]), to8(rgb[2])};
}

inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw Error(Errc::invalid_parameter, "gaussian sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable blur on a float plane with clamped borders. Shared by the 8-bit
/// blur and the keypoint detector.
inline std::vector<float> gaussian_blur_plane(std::span<const float> src, int width, int height,
                                              double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<float> tmp(src.size());
  std::vector<float> out(src.size());
  for (int y = 0; y < height; ++y) {
    const float* row = src.data() + static_cast<std::size_t>(y) * width;
    float* dst = tmp.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * row[std::clamp(x + i, 0, width - 1)];
      }
      dst[x] = static_cast<float>(acc);
    }
  }
  for (int y = 0; y < height; ++y) {
    float* dst = out.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, height - 1)) * width + x];
      }
      dst[x] = static_cast<float>(acc);
    }
  }
  return out;
}

inline GrayImage gaussian_blur(const GrayImage& g, double sigma) {
  std::vector<float> plane(g.pixels().begin(), g.pixels().end());
  const auto blurred = gaussian_blur_plane(plane, g.width(), g.height(), sigma);
  GrayImage out(g.width(), g.height());
  auto dst = out.pixels();
  for (std::size_t i = 0; i < blurred.size(); ++i) {
    dst[i] = static_cast<std::uint8_t>(std::clamp(std::lround(blurred[i]), 0L, 255L));
  }
  return out;
}

/// 255 where |a - b| > t, else 0.
inline BinaryImage abs_diff_threshold(const GrayImage& a, const GrayImage& b, int t) {
  require_same_shape(a, b, "abs_diff_threshold: image sizes differ");
  BinaryImage out(a.width(), a.height());
  auto pa = a.pixels();
  auto pb = b.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    dst[i] = std::abs(int{pa[i]} - int{pb[i]}) > t ? 255 : 0;
  }
  return out;
}

namespace detail {

// 3x3 min/max filter; out-of-bounds neighbours read as 0.
inline BinaryImage morph_3x3(const BinaryImage& b, bool erode) {
  BinaryImage out(b.width(), b.height());
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      bool any = false;
      bool all = true;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const bool on = b.contains(x + dx, y + dy) && b.at(x + dx, y + dy) != 0;
          any = any || on;
          all = all && on;
        }
      }
      out.at(x, y) = (erode ? all : any) ? 255 : 0;
    }
  }
  return out;
}

}  // namespace detail

inline BinaryImage erode_3x3(const BinaryImage& b) { return detail::morph_3x3(b, true); }
inline BinaryImage dilate_3x3(const BinaryImage& b) { return detail::morph_3x3(b, false); }

/// Opening: erosion followed by dilation with a full 3x3 element.
inline BinaryImage morph_open_3x3(const BinaryImage& b) { return dilate_3x3(erode_3x3(b)); }

using PixelSet = std::vector<PixelCoord>;

/// 8-connected labeling of foreground pixels. Components are returned in
/// raster order of their first pixel; pixels inside a component are sorted.
inline std::vector<PixelSet> connected_components(const BinaryImage& b) {
  const int w = b.width();
  const int h = b.height();
  std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
  std::vector<PixelSet> components;
  std::vector<PixelCoord> stack;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (b.at(x, y) == 0 || label[idx] >= 0) continue;
      const int id = static_cast<int>(components.size());
      components.emplace_back();
      label[idx] = id;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const PixelCoord p = stack.back();
        stack.pop_back();
        components.back().push_back(p);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx;
            const int ny = p.y + dy;
            if (!b.contains(nx, ny) || b.at(nx, ny) == 0) continue;
            const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
            if (label[nidx] >= 0) continue;
            label[nidx] = id;
            stack.push_back({nx, ny});
          }
        }
      }
      std::sort(components.back().begin(), components.back().end());
    }
  }
  return components;
}

/// Bilinear sample of a grayscale image with clamped borders.
inline double sample_bilinear_clamped(const GrayImage& g, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = g.clamped(x0, y0);
  const double v10 = g.clamped(x0 + 1, y0);
  const double v01 = g.clamped(x0, y0 + 1);
  const double v11 = g.clamped(x0 + 1, y0 + 1);
  return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

}  // namespace hexatrack
