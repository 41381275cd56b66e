#pragma once

// Interest points and symmetric k-nearest-neighbour matching between two
// consecutive frames.
//
// Detector: |det Hessian| on a Gaussian-smoothed image, 3x3 non-max
// suppression, parabolic sub-pixel refinement. Descriptor: 8x8 grid of mean
// intensities over a 16x16 patch, mean-subtracted and L2-normalized.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "hexatrack/error.hpp"
#include "hexatrack/image.hpp"
#include "hexatrack/imgproc.hpp"

namespace hexatrack {

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double response = 0.0;
};

constexpr std::size_t kDescriptorLength = 64;
using Descriptor = std::array<float, kDescriptorLength>;

struct Feature {
  Keypoint keypoint;
  Descriptor descriptor{};
};

struct MatchPair {
  Vec2 prev;  // point in frame n-1
  Vec2 curr;  // point in frame n
  double distance = 0.0;
  std::size_t prev_index = 0;
  std::size_t curr_index = 0;
};

struct DetectorParams {
  double smoothing_sigma = 1.6;
  double min_response = 1e-4;  // scale-normalized |det H| on [0,1] intensities
  // Selection buckets. Each cell of a grid_x by grid_y partition first gets
  // an equal share of the budget, leftovers go to the strongest remaining
  // points. 1x1 is plain top-N by response.
  int grid_x = 8;
  int grid_y = 6;
};

constexpr int kPatchSize = 16;
constexpr int kMinDetectSize = 32;

namespace detail {

inline Descriptor describe_patch(std::span<const float> plane, int width, int cx, int cy) {
  Descriptor d{};
  constexpr int half = kPatchSize / 2;
  constexpr int cell = kPatchSize / 8;
  for (int gy = 0; gy < 8; ++gy) {
    for (int gx = 0; gx < 8; ++gx) {
      double acc = 0.0;
      for (int yy = 0; yy < cell; ++yy) {
        for (int xx = 0; xx < cell; ++xx) {
          const int px = cx - half + gx * cell + xx;
          const int py = cy - half + gy * cell + yy;
          acc += plane[static_cast<std::size_t>(py) * width + px];
        }
      }
      d[gy * 8 + gx] = static_cast<float>(acc / (cell * cell));
    }
  }
  double mean = 0.0;
  for (float v : d) mean += v;
  mean /= kDescriptorLength;
  double norm2 = 0.0;
  for (float& v : d) {
    v = static_cast<float>(v - mean);
    norm2 += double{v} * v;
  }
  if (norm2 < 1e-18) {
    d.fill(0.0f);
    return d;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (float& v : d) v = static_cast<float>(v * inv);
  return d;
}

inline double parabolic_offset(double left, double center, double right) {
  const double denom = left - 2.0 * center + right;
  if (std::fabs(denom) < 1e-12) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

// `sorted` is ordered by decreasing response; so is the result.
inline std::vector<Keypoint> bucket_select(const std::vector<Keypoint>& sorted, std::size_t max_points, int w, int h,
                                           const DetectorParams& params) {
  const int gx = std::max(params.grid_x, 1);
  const int gy = std::max(params.grid_y, 1);
  const std::size_t quota = max_points / static_cast<std::size_t>(gx * gy);
  std::vector<std::size_t> used(static_cast<std::size_t>(gx * gy), 0);
  std::vector<std::uint8_t> taken(sorted.size(), 0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < sorted.size() && count < max_points; ++i) {
    const int cx = std::clamp(static_cast<int>(sorted[i].x * gx / w), 0, gx - 1);
    const int cy = std::clamp(static_cast<int>(sorted[i].y * gy / h), 0, gy - 1);
    auto& u = used[static_cast<std::size_t>(cy * gx + cx)];
    if (u < quota) {
      ++u;
      taken[i] = 1;
      ++count;
    }
  }
  for (std::size_t i = 0; i < sorted.size() && count < max_points; ++i) {
    if (!taken[i]) {
      taken[i] = 1;
      ++count;
    }
  }
  std::vector<Keypoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (taken[i]) out.push_back(sorted[i]);
  }
  return out;
}

}  // namespace detail

/// Detects up to `max_points` keypoints ordered by decreasing response.
inline std::vector<Feature> detect_and_describe(const GrayImage& g, std::size_t max_points,
                                                const DetectorParams& params = {}) {
  if (g.width() < kMinDetectSize || g.height() < kMinDetectSize) {
    throw Error(Errc::invalid_parameter, "image too small for feature detection (need >= 32x32)");
  }
  const int w = g.width();
  const int h = g.height();
  std::vector<float> plane(g.size());
  auto src = g.pixels();
  for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = src[i] / 255.0f;
  const auto smooth = gaussian_blur_plane(plane, w, h, params.smoothing_sigma);

  const double s2 = params.smoothing_sigma * params.smoothing_sigma;
  const double norm = s2 * s2;
  std::vector<float> response(plane.size(), 0.0f);
  auto I = [&](int x, int y) { return double{smooth[static_cast<std::size_t>(y) * w + x]}; };
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double c = I(x, y);
      const double dxx = I(x + 1, y) - 2.0 * c + I(x - 1, y);
      const double dyy = I(x, y + 1) - 2.0 * c + I(x, y - 1);
      const double dxy = 0.25 * (I(x + 1, y + 1) - I(x + 1, y - 1) - I(x - 1, y + 1) + I(x - 1, y - 1));
      response[static_cast<std::size_t>(y) * w + x] = static_cast<float>(norm * std::fabs(dxx * dyy - dxy * dxy));
    }
  }

  const int margin = kPatchSize / 2 + 1;
  auto R = [&](int x, int y) { return response[static_cast<std::size_t>(y) * w + x]; };
  std::vector<Keypoint> candidates;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      const float r = R(x, y);
      if (r <= params.min_response) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx != 0 || dy != 0) && R(x + dx, y + dy) >= r) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;
      const double ox = detail::parabolic_offset(R(x - 1, y), r, R(x + 1, y));
      const double oy = detail::parabolic_offset(R(x, y - 1), r, R(x, y + 1));
      candidates.push_back({x + ox, y + oy, r});
    }
  }
  auto by_response = [](const Keypoint& a, const Keypoint& b) { return a.response > b.response; };
  std::stable_sort(candidates.begin(), candidates.end(), by_response);
  if (candidates.size() > max_points) candidates = detail::bucket_select(candidates, max_points, w, h, params);

  std::vector<Feature> out;
  out.reserve(candidates.size());
  for (const auto& kp : candidates) {
    const int cx = static_cast<int>(std::lround(kp.x));
    const int cy = static_cast<int>(std::lround(kp.y));
    out.push_back({kp, detail::describe_patch(smooth, w, cx, cy)});
  }
  return out;
}

inline double descriptor_distance(const Descriptor& a, const Descriptor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < kDescriptorLength; ++i) {
    const double d = double{a[i]} - double{b[i]};
    acc += d * d;
  }
  return std::sqrt(acc);
}

/// Mutual k=2 nearest-neighbour matching with Lowe's ratio test applied in
/// both directions. When only one candidate exists the ratio test passes.
inline std::vector<MatchPair> symmetric_knn_match(std::span<const Feature> prev, std::span<const Feature> curr,
                                                  double ratio = 0.7) {
  std::vector<MatchPair> out;
  if (prev.empty() || curr.empty()) return out;
  const std::size_t na = prev.size();
  const std::size_t nb = curr.size();
  std::vector<double> dist(na * nb);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      dist[i * nb + j] = descriptor_distance(prev[i].descriptor, curr[j].descriptor);
    }
  }
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  auto best_of = [&](std::size_t count, auto&& d) {
    std::size_t best = none;
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < count; ++k) {
      const double v = d(k);
      if (v < d1) {
        d2 = d1;
        d1 = v;
        best = k;
      } else if (v < d2) {
        d2 = v;
      }
    }
    if (best == none) return none;
    if (std::isfinite(d2) && !(d1 < ratio * d2)) return none;
    return best;
  };

  std::vector<std::size_t> a_to_b(na), b_to_a(nb);
  for (std::size_t i = 0; i < na; ++i) a_to_b[i] = best_of(nb, [&](std::size_t j) { return dist[i * nb + j]; });
  for (std::size_t j = 0; j < nb; ++j) b_to_a[j] = best_of(na, [&](std::size_t i) { return dist[i * nb + j]; });

  for (std::size_t i = 0; i < na; ++i) {
    const std::size_t j = a_to_b[i];
    if (j == none || b_to_a[j] != i) continue;
    out.push_back({{prev[i].keypoint.x, prev[i].keypoint.y},
                   {curr[j].keypoint.x, curr[j].keypoint.y},
                   dist[i * nb + j],
                   i,
                   j});
  }
  return out;
}

/// Debug dump: one "x,y,response" row per keypoint.
inline void write_keypoints_csv(std::ostream& os, std::span<const Feature> features) {
  os << "x,y,response\n";
  for (const auto& f : features) os << f.keypoint.x << ',' << f.keypoint.y << ',' << f.keypoint.response << '\n';
}

}  // namespace hexatrack
