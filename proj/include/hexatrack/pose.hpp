#pragma once

#include <cmath>
#include <numbers>

namespace hexatrack {

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

/// Planar body pose. Heading grows clockwise seen from above, so a positive
/// heading change is a right turn.
struct BodyPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  friend bool operator==(const BodyPose&, const BodyPose&) = default;
};

}  // namespace hexatrack
