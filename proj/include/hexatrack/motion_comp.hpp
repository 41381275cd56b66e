#pragma once

// Background motion estimation: least-squares affine fit, adaptive
// residual-based outlier rejection, and inverse-mapped bilinear warping.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "hexatrack/error.hpp"
#include "hexatrack/feature_match.hpp"
#include "hexatrack/image.hpp"

namespace hexatrack {

/// [a b tx; c d ty] mapping (x, y) -> (a x + b y + tx, c x + d y + ty).
struct AffineTransform {
  double a = 1.0, b = 0.0, tx = 0.0;
  double c = 0.0, d = 1.0, ty = 0.0;

  static AffineTransform identity() { return {}; }
  static AffineTransform translation(double x, double y) { return {1.0, 0.0, x, 0.0, 1.0, y}; }

  Vec2 apply(Vec2 p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
  double det() const { return a * d - b * c; }

  bool finite() const {
    return std::isfinite(a) && std::isfinite(b) && std::isfinite(tx) && std::isfinite(c) && std::isfinite(d) &&
           std::isfinite(ty);
  }

  AffineTransform inverse() const {
    const double dt = det();
    if (!finite() || std::fabs(dt) <= 1e-6) throw Error(Errc::singular_transform, "affine transform is not invertible");
    const double ia = d / dt, ib = -b / dt, ic = -c / dt, id = a / dt;
    return {ia, ib, -(ia * tx + ib * ty), ic, id, -(ic * tx + id * ty)};
  }

  friend bool operator==(const AffineTransform&, const AffineTransform&) = default;
};

/// Least-squares affine mapping MatchPair::prev onto MatchPair::curr.
inline AffineTransform fit_affine_lsq(std::span<const MatchPair> pairs) {
  if (pairs.size() < 3) throw Error(Errc::degenerate_input, "affine fit needs at least 3 pairs");
  // Centre the source points for conditioning.
  double mx = 0.0, my = 0.0;
  for (const auto& p : pairs) {
    mx += p.prev.x;
    my += p.prev.y;
  }
  mx /= static_cast<double>(pairs.size());
  my /= static_cast<double>(pairs.size());

  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs_x = Eigen::Vector3d::Zero();
  Eigen::Vector3d rhs_y = Eigen::Vector3d::Zero();
  for (const auto& p : pairs) {
    const Eigen::Vector3d row(p.prev.x - mx, p.prev.y - my, 1.0);
    normal += row * row.transpose();
    rhs_x += row * p.curr.x;
    rhs_y += row * p.curr.y;
  }
  // Collinearity: the 2x2 scatter of centred points must have full rank.
  const Eigen::Matrix2d scatter = normal.topLeftCorner<2, 2>();
  const double trace = scatter.trace();
  if (!(trace > 0.0) || scatter.determinant() <= 1e-9 * trace * trace) {
    throw Error(Errc::degenerate_input, "affine fit source points are collinear");
  }
  const auto solver = normal.ldlt();
  const Eigen::Vector3d px = solver.solve(rhs_x);
  const Eigen::Vector3d py = solver.solve(rhs_y);
  AffineTransform t;
  t.a = px(0);
  t.b = px(1);
  t.tx = px(2) - px(0) * mx - px(1) * my;
  t.c = py(0);
  t.d = py(1);
  t.ty = py(2) - py(0) * mx - py(1) * my;
  if (!t.finite()) throw Error(Errc::degenerate_input, "affine fit produced non-finite entries");
  return t;
}

inline double residual(const AffineTransform& t, const MatchPair& p) { return (t.apply(p.prev) - p.curr).norm(); }

inline double rms_residual(const AffineTransform& t, std::span<const MatchPair> pairs) {
  if (pairs.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& p : pairs) acc += residual(t, p) * residual(t, p);
  return std::sqrt(acc / static_cast<double>(pairs.size()));
}

struct FilterParams {
  double c = 2.0;               // spread multiplier in the rejection threshold
  int max_iterations = 10;
  std::size_t min_inliers = 6;
  double residual_floor = 1.0;  // px; residuals at or below are never rejected
};

struct FilterResult {
  std::vector<MatchPair> inliers;   // background
  std::vector<MatchPair> outliers;  // foreground
  AffineTransform fit;
  int iterations = 0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace detail

/// Iteratively refits the affine model and keeps the pairs whose residual
/// is within median + c * 1.4826 * MAD of the residuals of the pairs the
/// model was fitted on. Every pair is re-classified against each new fit, so
/// a pair dropped early can come back. Stops when the set stops changing or
/// after max_iterations fits.
inline FilterResult adaptive_outlier_filter(std::span<const MatchPair> pairs, const FilterParams& params = {}) {
  if (pairs.size() < params.min_inliers) {
    throw Error(Errc::insufficient_data, "outlier filter needs at least 6 pairs");
  }
  const std::size_t n = pairs.size();
  FilterResult result;
  std::vector<double> res(n);
  auto residuals_for = [&](const AffineTransform& t) {
    for (std::size_t i = 0; i < n; ++i) res[i] = residual(t, pairs[i]);
  };
  auto subset = [&](const std::vector<std::uint8_t>& keep) {
    std::vector<MatchPair> out;
    for (std::size_t i = 0; i < n; ++i)
      if (keep[i]) out.push_back(pairs[i]);
    return out;
  };

  result.fit = fit_affine_lsq(pairs);
  result.iterations = 1;
  residuals_for(result.fit);
  std::vector<std::uint8_t> used(n, 1);
  if (*std::max_element(res.begin(), res.end()) > params.residual_floor) {
    // A least-squares start can bend onto a compact foreground cluster.
    // The median displacement can't while the foreground is under half.
    std::vector<double> dx(n), dy(n);
    for (std::size_t i = 0; i < n; ++i) {
      dx[i] = pairs[i].curr.x - pairs[i].prev.x;
      dy[i] = pairs[i].curr.y - pairs[i].prev.y;
    }
    AffineTransform model = AffineTransform::translation(detail::median_of(dx), detail::median_of(dy));
    bool refit = false;
    for (;;) {
      residuals_for(model);
      std::vector<double> base;
      for (std::size_t i = 0; i < n; ++i)
        if (used[i]) base.push_back(res[i]);
      const double med = detail::median_of(base);
      for (auto& v : base) v = std::fabs(v - med);
      const double threshold = std::max(med + params.c * 1.4826 * detail::median_of(base), params.residual_floor);

      std::vector<std::uint8_t> next(n);
      std::size_t kept = 0;
      for (std::size_t i = 0; i < n; ++i) kept += next[i] = res[i] <= threshold;
      if (kept < params.min_inliers) throw Error(Errc::degenerate_filter, "inlier set collapsed below 6 pairs");
      if (refit && next == used) break;
      used = std::move(next);
      model = fit_affine_lsq(subset(used));
      refit = true;
      if (++result.iterations >= params.max_iterations) break;
    }
    result.fit = model;
  }

  for (std::size_t i = 0; i < n; ++i) {
    (used[i] ? result.inliers : result.outliers).push_back(pairs[i]);
  }
  return result;
}

namespace detail {

template <typename Pixel>
Pixel blend_bilinear(const Pixel& p00, const Pixel& p10, const Pixel& p01, const Pixel& p11, double fx, double fy) {
  auto mix = [&](double v00, double v10, double v01, double v11) {
    const double v = (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  };
  if constexpr (std::is_same_v<Pixel, Rgb>) {
    return {mix(p00.r, p10.r, p01.r, p11.r), mix(p00.g, p10.g, p01.g, p11.g), mix(p00.b, p10.b, p01.b, p11.b)};
  } else {
    return mix(p00, p10, p01, p11);
  }
}

}  // namespace detail

/// Warps `src` by T: out(x) = src(T^-1 x), bilinear, zero outside the source.
template <typename Img>
  requires Raster<Img>
Img warp_affine(const Img& src, const AffineTransform& t) {
  const AffineTransform inv = t.inverse();
  Img out = src;
  const int w = src.width();
  const int h = src.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec2 s = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      // Snap values within rounding noise of an integer so that exact
      // integer shifts copy pixels bit-for-bit.
      const double sx = std::fabs(s.x - std::round(s.x)) < 1e-9 ? std::round(s.x) : s.x;
      const double sy = std::fabs(s.y - std::round(s.y)) < 1e-9 ? std::round(s.y) : s.y;
      if (sx < 0.0 || sy < 0.0 || sx > w - 1 || sy > h - 1) {
        out.at(x, y) = typename Img::pixel_type{};
        continue;
      }
      const int x0 = static_cast<int>(sx);
      const int y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      out.at(x, y) = detail::blend_bilinear(src.at(x0, y0), src.at(x1, y0), src.at(x0, y1), src.at(x1, y1), sx - x0,
                                            sy - y0);
    }
  }
  return out;
}

}  // namespace hexatrack
