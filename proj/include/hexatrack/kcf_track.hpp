#pragma once

// Kernelized correlation filter tracker, single grayscale channel, Gaussian
// kernel, fixed scale.
//
// The search window is `padding` times the target box, resampled onto a
// power-of-two grid. Grid cell (i, j) samples the image at
// center + ((i - gw/2) * win_w / gw, (j - gh/2) * win_h / gh).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <string>

#include "hexatrack/error.hpp"
#include "hexatrack/fft.hpp"
#include "hexatrack/image.hpp"
#include "hexatrack/imgproc.hpp"

namespace hexatrack {

struct KcfParams {
  double padding = 2.5;
  double sigma = 0.5;     // kernel width on [-0.5, 0.5] features
  double lambda = 1e-4;   // ridge
  double eta = 0.075;     // model interpolation
  double target_bandwidth = 0.1;  // regression target sigma as a fraction of sqrt(w*h)
  int min_grid = 16;
  int max_grid = 256;

  void validate() const {
    if (!(padding >= 1.0)) throw Error(Errc::invalid_parameter, "kcf padding must be >= 1");
    if (!(sigma > 0.0)) throw Error(Errc::invalid_parameter, "kcf sigma must be positive");
    if (!(lambda > 0.0)) throw Error(Errc::invalid_parameter, "kcf lambda must be positive");
    if (!(eta >= 0.0 && eta <= 1.0)) throw Error(Errc::invalid_parameter, "kcf eta must be in [0, 1]");
    if (!(target_bandwidth > 0.0)) throw Error(Errc::invalid_parameter, "kcf target bandwidth must be positive");
    if (!is_power_of_two(min_grid) || !is_power_of_two(max_grid) || min_grid > max_grid) {
      throw Error(Errc::invalid_parameter, "kcf grid bounds must be powers of two");
    }
  }
};

struct TrackState {
  Box box;
  double window_w = 0.0;  // image px
  double window_h = 0.0;
  RealPlane cosine_window;
  RealPlane templ;        // windowed features
  ComplexPlane alpha_f;   // model, frequency domain
  ComplexPlane y_f;       // regression target, frequency domain
  KcfParams params;
  std::int64_t updates = 0;

  int grid_w() const { return cosine_window.width; }
  int grid_h() const { return cosine_window.height; }
};

struct TrackResult {
  Box box;
  double peak = 0.0;
  Vec2 peak_location;  // grid cell of the response maximum
  Vec2 displacement;   // image px moved this step
};

namespace detail {

// Smallest power of two covering the window, so the patch is never
// downsampled.
inline int grid_size(double extent, const KcfParams& p) {
  const double l = std::log2(std::max(extent, 1.0));
  int g = 1 << static_cast<int>(std::ceil(l));
  return std::clamp(g, p.min_grid, p.max_grid);
}

// Periodic Hann window; the maximum is exactly 1 at the centre cell.
inline RealPlane hann2(int w, int h) {
  RealPlane out(w, h);
  for (int y = 0; y < h; ++y) {
    const double wy = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * y / h);
    for (int x = 0; x < w; ++x) {
      out.at(x, y) = wy * (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * x / w));
    }
  }
  return out;
}

inline RealPlane gaussian_target(int w, int h, double sigma) {
  RealPlane out(w, h);
  const double cx = w / 2;
  const double cy = h / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      out.at(x, y) = std::exp(-0.5 * d2 / (sigma * sigma));
    }
  }
  return out;
}

inline RealPlane extract_features(const GrayImage& g, Vec2 center, const TrackState& s) {
  const int gw = s.grid_w();
  const int gh = s.grid_h();
  const double sx = s.window_w / gw;
  const double sy = s.window_h / gh;
  RealPlane out(gw, gh);
  for (int j = 0; j < gh; ++j) {
    const double y = center.y + (j - gh / 2) * sy;
    for (int i = 0; i < gw; ++i) {
      const double x = center.x + (i - gw / 2) * sx;
      const double v = sample_bilinear_clamped(g, x, y) / 255.0 - 0.5;
      out.at(i, j) = v * s.cosine_window.at(i, j);
    }
  }
  return out;
}

inline ComplexPlane train(const RealPlane& x, const TrackState& s);

inline bool window_outside(const GrayImage& g, Vec2 c, double ww, double wh) {
  return c.x + 0.5 * ww < 0.0 || c.y + 0.5 * wh < 0.0 || c.x - 0.5 * ww > g.width() - 1 ||
         c.y - 0.5 * wh > g.height() - 1;
}

inline double signed_offset(double idx, int n, int center) {
  double d = idx - center;
  if (d > n / 2) d -= n;
  if (d < -n / 2) d += n;
  return d;
}

}  // namespace detail

/// Kernel correlation of x against every cyclic shift of z.
inline RealPlane gaussian_correlation(const RealPlane& x, const RealPlane& z, double sigma) {
  if (!(sigma > 0.0)) throw Error(Errc::invalid_parameter, "kernel sigma must be positive");
  if (x.width != z.width || x.height != z.height) {
    throw Error(Errc::dimension_mismatch, "gaussian_correlation: patch sizes differ");
  }
  const ComplexPlane xf = dft2(x);
  const ComplexPlane zf = dft2(z);
  ComplexPlane prod(x.width, x.height);
  for (std::size_t i = 0; i < prod.size(); ++i) prod.data[i] = detail::cmul_conj(xf.data[i], zf.data[i]);
  const RealPlane xz = idft2_real(std::move(prod));
  double xx = 0.0, zz = 0.0;
  for (double v : x.data) xx += v * v;
  for (double v : z.data) zz += v * v;
  const double n = static_cast<double>(x.size());
  RealPlane k(x.width, x.height);
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double d = std::max(0.0, xx + zz - 2.0 * xz.data[i]);
    k.data[i] = std::exp(-d / (sigma * sigma * n));
  }
  return k;
}

namespace detail {

inline ComplexPlane train(const RealPlane& x, const TrackState& s) {
  const ComplexPlane kf = dft2(gaussian_correlation(x, x, s.params.sigma));
  ComplexPlane alpha(kf.width, kf.height);
  for (std::size_t i = 0; i < kf.size(); ++i) alpha.data[i] = cdiv_real_shift(s.y_f.data[i], kf.data[i], s.params.lambda);
  return alpha;
}

}  // namespace detail

inline TrackState init_track(const GrayImage& g, const Box& box, const KcfParams& params = {}) {
  params.validate();
  if (!(box.w > 0.0 && box.h > 0.0) || box.area() < 16.0) {
    throw Error(Errc::invalid_parameter, "track box must cover at least 16 px^2");
  }
  if (box.x < 0.0 || box.y < 0.0 || box.x + box.w > g.width() || box.y + box.h > g.height()) {
    throw Error(Errc::invalid_parameter, "track box lies outside the frame");
  }
  TrackState s;
  s.box = box;
  s.params = params;
  s.window_w = box.w * params.padding;
  s.window_h = box.h * params.padding;
  const int gw = detail::grid_size(s.window_w, params);
  const int gh = detail::grid_size(s.window_h, params);
  s.cosine_window = detail::hann2(gw, gh);
  // Target extent in grid cells.
  const double tw = box.w * gw / s.window_w;
  const double th = box.h * gh / s.window_h;
  s.y_f = dft2(detail::gaussian_target(gw, gh, std::sqrt(tw * th) * params.target_bandwidth));
  s.templ = detail::extract_features(g, box.center(), s);
  s.alpha_f = detail::train(s.templ, s);
  return s;
}

inline TrackState init_track(const Frame& f, const Box& box, const KcfParams& params = {}) {
  return init_track(to_grayscale(f), box, params);
}

inline TrackResult update_track(TrackState& s, const GrayImage& g) {
  if (s.alpha_f.size() == 0) throw Error(Errc::invalid_parameter, "tracker is not initialized");
  const Vec2 c = s.box.center();
  if (detail::window_outside(g, c, s.window_w, s.window_h)) {
    throw Error(Errc::lost_target, "search window is outside the frame");
  }
  const int gw = s.grid_w();
  const int gh = s.grid_h();
  const RealPlane z = detail::extract_features(g, c, s);
  ComplexPlane rf = dft2(gaussian_correlation(s.templ, z, s.params.sigma));
  for (std::size_t i = 0; i < rf.size(); ++i) rf.data[i] = detail::cmul(rf.data[i], s.alpha_f.data[i]);
  const RealPlane resp = idft2_real(std::move(rf));

  std::size_t best = 0;
  for (std::size_t i = 1; i < resp.size(); ++i) {
    if (resp.data[i] > resp.data[best]) best = i;
  }
  const int bx = static_cast<int>(best % gw);
  const int by = static_cast<int>(best / gw);
  const double peak = resp.data[best];
  if (!std::isfinite(peak)) throw Error(Errc::lost_target, "tracker response is not finite");
  auto at = [&](int x, int y) { return resp.at((x + gw) % gw, (y + gh) % gh); };
  auto refine = [](double l, double m, double r) {
    const double den = l - 2.0 * m + r;
    return std::fabs(den) < 1e-12 ? 0.0 : std::clamp(0.5 * (l - r) / den, -0.5, 0.5);
  };
  const double px = bx + refine(at(bx - 1, by), peak, at(bx + 1, by));
  const double py = by + refine(at(bx, by - 1), peak, at(bx, by + 1));

  TrackResult out;
  out.peak = peak;
  out.peak_location = {px, py};
  out.displacement = {detail::signed_offset(px, gw, gw / 2) * s.window_w / gw,
                      detail::signed_offset(py, gh, gh / 2) * s.window_h / gh};
  s.box = Box::from_center(c + out.displacement, s.box.w, s.box.h);
  out.box = s.box;

  // Retrain at the new location and blend.
  const RealPlane x = detail::extract_features(g, s.box.center(), s);
  const ComplexPlane alpha = detail::train(x, s);
  const double eta = s.params.eta;
  for (std::size_t i = 0; i < alpha.size(); ++i) s.alpha_f.data[i] = (1.0 - eta) * s.alpha_f.data[i] + eta * alpha.data[i];
  for (std::size_t i = 0; i < x.size(); ++i) s.templ.data[i] = (1.0 - eta) * s.templ.data[i] + eta * x.data[i];
  ++s.updates;
  return out;
}

inline TrackResult update_track(TrackState& s, const Frame& f) { return update_track(s, to_grayscale(f)); }

/// Track log: frame,cx,cy,w,h,peak
inline void write_track_header(std::ostream& os) { os << "frame,cx,cy,w,h,peak\n"; }

inline void write_track_row(std::ostream& os, std::int64_t frame, const Box& box, double peak) {
  const Vec2 c = box.center();
  os << frame << ',' << c.x << ',' << c.y << ',' << box.w << ',' << box.h << ',' << peak << '\n';
}

}  // namespace hexatrack
