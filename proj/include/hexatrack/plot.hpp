#pragma once

// Minimal PNG line chart for offset traces.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hexatrack/error.hpp"
#include "hexatrack/image.hpp"
#include "hexatrack/image_io.hpp"

namespace hexatrack::plot {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  Rgb color{0, 0, 0};
};

struct ChartOptions {
  int width = 800;
  int height = 400;
  int margin = 30;
  std::vector<double> hlines;  // dashed horizontal guides, e.g. the dead band
};

inline Frame line_chart(const std::vector<Series>& series, const ChartOptions& opt = {}) {
  if (opt.width <= 2 * opt.margin || opt.height <= 2 * opt.margin) {
    throw Error(Errc::invalid_parameter, "chart too small for its margins");
  }
  double x0 = 1e300, x1 = -1e300, y0 = 0.0, y1 = 0.0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw Error(Errc::dimension_mismatch, "series x/y lengths differ");
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  for (double h : opt.hlines) y0 = std::min(y0, h), y1 = std::max(y1, h);
  if (!(x1 > x0)) x0 = 0.0, x1 = 1.0;
  if (!(y1 > y0)) y0 = -1.0, y1 = 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  Frame img(opt.width, opt.height, Rgb{255, 255, 255});
  const int pw = opt.width - 2 * opt.margin;
  const int ph = opt.height - 2 * opt.margin;
  auto px = [&](double x) { return opt.margin + static_cast<int>(std::lround((x - x0) / (x1 - x0) * pw)); };
  auto py = [&](double y) { return opt.margin + static_cast<int>(std::lround((y1 - y) / (y1 - y0) * ph)); };

  const Rgb axis{90, 90, 90};
  io::draw_rect(img, {double(opt.margin), double(opt.margin), double(pw + 1), double(ph + 1)}, axis, 1);
  io::draw_line(img, opt.margin, py(0.0), opt.margin + pw, py(0.0), axis);
  for (double h : opt.hlines) {
    const int y = py(h);
    for (int x = opt.margin; x < opt.margin + pw; x += 8) io::draw_line(img, x, y, std::min(x + 3, opt.margin + pw), y, {160, 160, 160});
  }
  for (const auto& s : series) {
    for (std::size_t i = 1; i < s.x.size(); ++i) {
      io::draw_line(img, px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), s.color);
    }
  }
  return img;
}

}  // namespace hexatrack::plot
