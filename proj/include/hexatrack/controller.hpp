#pragma once

// Pixel offset of the tracked target from the image centre -> body yaw and
// gimbal pitch, with a dead band around the centre.

#include <cmath>
#include <numbers>

#include "hexatrack/error.hpp"
#include "hexatrack/image.hpp"

namespace hexatrack {

struct PixelOffset {
  double dx = 0.0;  // + right of centre
  double dy = 0.0;  // + below centre
};

struct ControllerParams {
  double th = 80.0;                                  // px
  double k_yaw = 2.18e-3;                            // rad/px, printed constant
  double k_pitch = (std::numbers::pi / 12.0) / 160.0;  // rad/px

  // k from (pi/12)/(320 - th); half the printed constant.
  static double formula_k_yaw(double th = 80.0) { return (std::numbers::pi / 12.0) / (320.0 - th); }

  void validate() const {
    if (!(th >= 0.0)) throw Error(Errc::invalid_parameter, "controller dead band must be >= 0");
    if (!(k_yaw > 0.0) || !(k_pitch > 0.0)) throw Error(Errc::invalid_parameter, "controller gains must be positive");
  }
};

/// Offset of the box centre from the image centre.
inline PixelOffset offset_of(const Box& box, int width = kFrameWidth, int height = kFrameHeight) {
  const Vec2 c = box.center();
  return {c.x - 0.5 * width, c.y - 0.5 * height};
}

namespace detail {

inline double deadband_law(double d, double th, double k) {
  const double mag = std::fabs(d);
  if (!(mag > th)) return 0.0;
  return std::copysign((mag - th) * k, d);
}

}  // namespace detail

/// Radians to turn; positive turns right, towards positive dx.
inline double yaw_command(double dx, const ControllerParams& p = {}) { return detail::deadband_law(dx, p.th, p.k_yaw); }

/// Radians of gimbal pitch change; positive tilts down, towards positive dy.
inline double pitch_command(double dy, const ControllerParams& p = {}) {
  return detail::deadband_law(dy, p.th, p.k_pitch);
}

}  // namespace hexatrack
