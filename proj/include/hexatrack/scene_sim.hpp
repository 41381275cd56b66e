#pragma once

// Synthetic egocentric world: a textured wall seen by a yaw/pitch pinhole
// camera on the robot, with painted targets moving along the wall.
//
// Target and texture coordinates are "reference pixels": the image position
// a wall point would have from the home pose (origin, heading 0, level
// gimbal, no jitter). That keeps scene configs readable in image terms.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "hexatrack/error.hpp"
#include "hexatrack/image.hpp"
#include "hexatrack/imgproc.hpp"
#include "hexatrack/pose.hpp"

namespace hexatrack::scene {

enum class PartShape { rect, ellipse };

struct PartSpec {
  PartShape shape = PartShape::rect;
  Vec2 offset;  // from the target position, reference px
  double width = 20.0;
  double height = 20.0;
  HsvColor color{170.0, 200.0, 200.0};
  double pattern = 45.0;  // brightness modulation amplitude, 8-bit levels
  double stripes = 0.0;   // vertical bar amplitude, 8-bit levels
  double stripe_period = 12.0;
};

struct Waypoint {
  double frame = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct TargetSpec {
  int id = 0;
  std::vector<PartSpec> parts;
  std::vector<Waypoint> trajectory;  // piecewise linear, held constant outside
  double perturbation = 0.0;         // per-part motion amplitude, px
  double perturbation_period = 12.0; // frames
};

struct SceneConfig {
  std::uint64_t texture_seed = 1;
  double texture_cell = 32.0;  // coarsest value-noise cell, px
  int texture_octaves = 4;
  double texture_contrast = 1.0;
  std::vector<TargetSpec> targets;
  int width = kFrameWidth;
  int height = kFrameHeight;
  double focal_px = 500.0;
  double wall_distance = 5.0;  // world units
  double jitter = 0.0;         // px, uniform in [-jitter, jitter]
  bool rotational_jitter = false;
  double rotational_jitter_rad = 0.0;
  std::uint64_t rng_seed = 7;
};

struct TargetTruth {
  int id = 0;
  Box box;  // clipped to the image
  bool visible = false;
};

struct GroundTruthEntry {
  std::int64_t frame = 0;
  BodyPose pose;
  double gimbal_pitch = 0.0;
  Vec2 jitter;
  std::vector<TargetTruth> targets;

  const TargetTruth* find(int id) const {
    for (const auto& t : targets) {
      if (t.id == id) return &t;
    }
    return nullptr;
  }
};

using GroundTruth = std::vector<GroundTruthEntry>;

inline void validate(const SceneConfig& cfg) {
  if (cfg.width <= 0 || cfg.height <= 0) throw Error(Errc::invalid_parameter, "scene size must be positive");
  if (!(cfg.focal_px > 0.0)) throw Error(Errc::invalid_parameter, "focal length must be positive");
  if (!(cfg.wall_distance > 0.0)) throw Error(Errc::invalid_parameter, "wall distance must be positive");
  if (cfg.jitter < 0.0) throw Error(Errc::invalid_parameter, "jitter amplitude must be >= 0");
  if (cfg.texture_octaves < 1 || !(cfg.texture_cell > 0.0)) {
    throw Error(Errc::invalid_parameter, "texture needs >= 1 octave and a positive cell size");
  }
  for (const auto& t : cfg.targets) {
    if (t.parts.empty()) throw Error(Errc::invalid_parameter, "target without parts");
    if (t.perturbation < 0.0) throw Error(Errc::invalid_parameter, "perturbation must be >= 0");
    for (const auto& p : t.parts) {
      if (!(p.width > 0.0 && p.height > 0.0)) throw Error(Errc::invalid_parameter, "part size must be positive");
      if (!(p.stripe_period > 0.0)) throw Error(Errc::invalid_parameter, "stripe period must be positive");
    }
  }
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline double unit_from_bits(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

inline double lattice(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
  const auto h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x8CB92BA72F3D8DD7ULL +
                                              static_cast<std::uint64_t>(iy)));
  return unit_from_bits(h);
}

inline double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

/// Smoothly interpolated lattice noise in [0, 1).
inline double value_noise(double x, double y, double cell, std::uint64_t seed) {
  const double gx = x / cell;
  const double gy = y / cell;
  const double fx0 = std::floor(gx);
  const double fy0 = std::floor(gy);
  const auto ix = static_cast<std::int64_t>(fx0);
  const auto iy = static_cast<std::int64_t>(fy0);
  const double tx = smooth(gx - fx0);
  const double ty = smooth(gy - fy0);
  const double a = lattice(ix, iy, seed);
  const double b = lattice(ix + 1, iy, seed);
  const double c = lattice(ix, iy + 1, seed);
  const double d = lattice(ix + 1, iy + 1, seed);
  return (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
}

inline Rgb background(const SceneConfig& cfg, double s, double r) {
  double lum = 0.0;
  double amp = 0.5;
  double total = 0.0;
  double cell = cfg.texture_cell;
  for (int o = 0; o < cfg.texture_octaves; ++o) {
    lum += amp * value_noise(s, r, cell, cfg.texture_seed + 101 * o);
    total += amp;
    amp *= 0.6;
    cell *= 0.5;
  }
  lum = 0.5 + cfg.texture_contrast * (lum / total - 0.5) * 1.6;
  lum = std::clamp(lum, 0.0, 1.0);
  const double tint = value_noise(s, r, 4.0 * cfg.texture_cell, cfg.texture_seed ^ 0xABCDEFULL) - 0.5;
  auto to8 = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
  return {to8(40 + 170 * lum + 24 * tint), to8(38 + 165 * lum), to8(34 + 160 * lum - 24 * tint)};
}

struct CameraModel {
  double cx, cy, f, wall;
  double cos_h, sin_h, cos_p, sin_p;
  double px, py;

  CameraModel(const SceneConfig& cfg, const BodyPose& pose, double gimbal_pitch)
      : cx(0.5 * cfg.width), cy(0.5 * cfg.height), f(cfg.focal_px), wall(cfg.wall_distance),
        cos_h(std::cos(pose.heading)), sin_h(std::sin(pose.heading)),
        cos_p(std::cos(gimbal_pitch)), sin_p(std::sin(gimbal_pitch)), px(pose.x), py(pose.y) {}

  // Image point (already jitter-corrected) -> reference wall coordinates.
  Vec2 to_reference(double u, double v) const {
    const double a = (u - cx) / f;
    const double b_up = -(v - cy) / f;
    const double fwd = cos_p + sin_p * b_up;
    const double up = -sin_p + cos_p * b_up;
    const double dxw = std::max(fwd * cos_h - a * sin_h, 1e-3);
    const double dyw = fwd * sin_h + a * cos_h;
    const double t = (wall - px) / dxw;
    const double y_hit = py + t * dyw;
    const double z_hit = t * up;
    return {cx + y_hit * f / wall, cy - z_hit * f / wall};
  }

  // Reference wall coordinates -> image point (before jitter). Empty when the
  // point is behind the camera.
  std::optional<Vec2> to_image(double s, double r) const {
    const double y_hit = (s - cx) * wall / f;
    const double z_hit = -(r - cy) * wall / f;
    const double dx = wall - px;
    const double dy = y_hit - py;
    const double fh = dx * cos_h + dy * sin_h;
    const double rt = -dx * sin_h + dy * cos_h;
    const double c = fh * cos_p - z_hit * sin_p;
    const double cu = fh * sin_p + z_hit * cos_p;
    if (c <= 1e-9) return std::nullopt;
    return Vec2{cx + f * rt / c, cy - f * cu / c};
  }
};

inline Vec2 jitter_for(const SceneConfig& cfg, std::int64_t n) {
  if (cfg.jitter <= 0.0) return {};
  const auto base = splitmix64(cfg.rng_seed ^ splitmix64(static_cast<std::uint64_t>(n) + 0x51ULL));
  const double jx = (2.0 * unit_from_bits(splitmix64(base)) - 1.0) * cfg.jitter;
  const double jy = (2.0 * unit_from_bits(splitmix64(base + 1)) - 1.0) * cfg.jitter;
  return {jx, jy};
}

inline double rot_jitter_for(const SceneConfig& cfg, std::int64_t n) {
  if (!cfg.rotational_jitter || cfg.rotational_jitter_rad <= 0.0) return 0.0;
  const auto bits = splitmix64(cfg.rng_seed ^ splitmix64(static_cast<std::uint64_t>(n) + 0x77ULL));
  return (2.0 * unit_from_bits(bits) - 1.0) * cfg.rotational_jitter_rad;
}

struct PlacedPart {
  const PartSpec* spec;
  Vec2 center;
  std::uint64_t pattern_seed;
};

}  // namespace detail

/// Target position (reference px) at frame n.
inline Vec2 target_position(const TargetSpec& t, double n) {
  if (t.trajectory.empty()) return {kFrameWidth * 0.5, kFrameHeight * 0.5};
  if (n <= t.trajectory.front().frame) return {t.trajectory.front().x, t.trajectory.front().y};
  for (std::size_t i = 1; i < t.trajectory.size(); ++i) {
    const auto& a = t.trajectory[i - 1];
    const auto& b = t.trajectory[i];
    if (n <= b.frame) {
      const double span = b.frame - a.frame;
      const double u = span > 0.0 ? (n - a.frame) / span : 1.0;
      return {a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)};
    }
  }
  return {t.trajectory.back().x, t.trajectory.back().y};
}

/// Center of part k at frame n, including its non-rigid perturbation.
inline Vec2 part_center(const TargetSpec& t, std::size_t k, std::int64_t n) {
  Vec2 c = target_position(t, static_cast<double>(n)) + t.parts[k].offset;
  if (t.perturbation > 0.0) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(n) / t.perturbation_period + 2.1 * static_cast<double>(k);
    c = c + Vec2{t.perturbation * std::sin(phase), 0.3 * t.perturbation * std::cos(phase)};
  }
  return c;
}

/// Bounding box of a target in reference coordinates.
inline Box reference_box(const TargetSpec& t, std::int64_t n) {
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (std::size_t k = 0; k < t.parts.size(); ++k) {
    const Vec2 c = part_center(t, k, n);
    x0 = std::min(x0, c.x - 0.5 * t.parts[k].width);
    x1 = std::max(x1, c.x + 0.5 * t.parts[k].width);
    y0 = std::min(y0, c.y - 0.5 * t.parts[k].height);
    y1 = std::max(y1, c.y + 0.5 * t.parts[k].height);
  }
  return {x0, y0, x1 - x0, y1 - y0};
}

/// Renders frame n seen from `pose` with the gimbal tilted down by
/// `gimbal_pitch` radians.
inline std::pair<Frame, GroundTruthEntry> render_frame(const SceneConfig& cfg, const BodyPose& pose,
                                                       double gimbal_pitch, std::int64_t n) {
  if (n < 0) throw Error(Errc::invalid_parameter, "frame index must be >= 0");
  validate(cfg);
  const detail::CameraModel cam(cfg, pose, gimbal_pitch);
  const Vec2 jit = detail::jitter_for(cfg, n);
  const double roll = detail::rot_jitter_for(cfg, n);
  const double cr = std::cos(roll);
  const double sr = std::sin(roll);

  std::vector<detail::PlacedPart> parts;
  for (const auto& t : cfg.targets) {
    for (std::size_t k = 0; k < t.parts.size(); ++k) {
      parts.push_back({&t.parts[k], part_center(t, k, n),
                       detail::splitmix64(cfg.rng_seed + 1000003ULL * static_cast<std::uint64_t>(t.id) + k)});
    }
  }

  Frame frame(cfg.width, cfg.height, {}, n);
  for (int v = 0; v < cfg.height; ++v) {
    for (int u = 0; u < cfg.width; ++u) {
      double su = u + jit.x - cam.cx;
      double sv = v + jit.y - cam.cy;
      if (roll != 0.0) {
        const double ru = cr * su - sr * sv;
        sv = sr * su + cr * sv;
        su = ru;
      }
      const Vec2 ref = cam.to_reference(su + cam.cx, sv + cam.cy);
      const detail::PlacedPart* hit = nullptr;
      // Painter's order: later parts are drawn on top.
      for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        const double lx = (ref.x - it->center.x) / (0.5 * it->spec->width);
        const double ly = (ref.y - it->center.y) / (0.5 * it->spec->height);
        const bool inside = it->spec->shape == PartShape::rect
                                ? (std::fabs(lx) <= 1.0 && std::fabs(ly) <= 1.0)
                                : (lx * lx + ly * ly <= 1.0);
        if (inside) {
          hit = &*it;
          break;
        }
      }
      if (hit == nullptr) {
        frame.at(u, v) = detail::background(cfg, ref.x, ref.y);
        continue;
      }
      HsvColor c = hit->spec->color;
      const double pat =
          detail::value_noise(ref.x - hit->center.x + 1000.0, ref.y - hit->center.y + 1000.0, 5.0, hit->pattern_seed);
      double dv = hit->spec->pattern * (2.0 * pat - 1.0);
      if (hit->spec->stripes > 0.0) {
        const double phase = (ref.x - hit->center.x) / hit->spec->stripe_period;
        dv += phase - std::floor(phase) < 0.5 ? hit->spec->stripes : -hit->spec->stripes;
      }
      c.v = std::clamp(c.v + dv, 0.0, 255.0);
      frame.at(u, v) = hsv_to_rgb(c);
    }
  }

  GroundTruthEntry truth;
  truth.frame = n;
  truth.pose = pose;
  truth.gimbal_pitch = gimbal_pitch;
  truth.jitter = jit;
  const Box image_box{0.0, 0.0, static_cast<double>(cfg.width), static_cast<double>(cfg.height)};
  for (const auto& t : cfg.targets) {
    const Box rb = reference_box(t, n);
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    bool ok = true;
    for (const Vec2 corner : {Vec2{rb.x, rb.y}, Vec2{rb.x + rb.w, rb.y}, Vec2{rb.x, rb.y + rb.h},
                              Vec2{rb.x + rb.w, rb.y + rb.h}}) {
      const auto p = cam.to_image(corner.x, corner.y);
      if (!p) {
        ok = false;
        break;
      }
      // Undo jitter (and roll) to land in frame pixel coordinates.
      double du = p->x - cam.cx;
      double dv = p->y - cam.cy;
      if (roll != 0.0) {
        const double ru = cr * du + sr * dv;
        dv = -sr * du + cr * dv;
        du = ru;
      }
      const double iu = du + cam.cx - jit.x;
      const double iv = dv + cam.cy - jit.y;
      x0 = std::min(x0, iu);
      x1 = std::max(x1, iu);
      y0 = std::min(y0, iv);
      y1 = std::max(y1, iv);
    }
    TargetTruth tt;
    tt.id = t.id;
    if (ok) {
      const Box full{x0, y0, x1 - x0, y1 - y0};
      const double cx0 = std::max(full.x, 0.0);
      const double cy0 = std::max(full.y, 0.0);
      const double cx1 = std::min(full.x + full.w, image_box.w);
      const double cy1 = std::min(full.y + full.h, image_box.h);
      if (cx1 > cx0 && cy1 > cy0) {
        tt.box = {cx0, cy0, cx1 - cx0, cy1 - cy0};
        tt.visible = true;
      }
    }
    truth.targets.push_back(tt);
  }
  return {std::move(frame), std::move(truth)};
}

/// Renders frames 0..count-1, frame i from poses[i] with a level gimbal.
/// `jobs` > 1 renders frames on worker threads; output is identical.
inline std::pair<std::vector<Frame>, GroundTruth> generate_sequence(const SceneConfig& cfg,
                                                                    const std::vector<BodyPose>& poses,
                                                                    std::size_t count, unsigned jobs = 1) {
  if (count < 1) throw Error(Errc::invalid_parameter, "sequence needs at least one frame");
  if (poses.size() != count) throw Error(Errc::invalid_parameter, "need exactly one pose per frame");
  validate(cfg);
  std::vector<Frame> frames(count);
  GroundTruth truth(count);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < count; i += stride) {
      auto [f, gt] = render_frame(cfg, poses[i], 0.0, static_cast<std::int64_t>(i));
      frames[i] = std::move(f);
      truth[i] = std::move(gt);
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
  }
  return {std::move(frames), std::move(truth)};
}

// ---------------------------------------------------------------------------
/// Ground truth as CSV: frame,target,x,y,w,h (visible targets only).
inline void write_ground_truth_csv(std::ostream& os, const GroundTruth& truth) {
  os << "frame,target,x,y,w,h\n";
  for (const auto& e : truth) {
    for (const auto& t : e.targets) {
      if (!t.visible) continue;
      os << e.frame << ',' << t.id << ',' << t.box.x << ',' << t.box.y << ',' << t.box.w << ',' << t.box.h << '\n';
    }
  }
}

// JSON serialization

NLOHMANN_JSON_SERIALIZE_ENUM(PartShape, {{PartShape::rect, "rect"}, {PartShape::ellipse, "ellipse"}})

inline void to_json(nlohmann::json& j, const PartSpec& p) {
  j = {{"shape", p.shape},
       {"offset", {p.offset.x, p.offset.y}},
       {"width", p.width},
       {"height", p.height},
       {"hsv", {p.color.h, p.color.s, p.color.v}},
       {"pattern", p.pattern},
       {"stripes", p.stripes},
       {"stripe_period", p.stripe_period}};
}

inline void from_json(const nlohmann::json& j, PartSpec& p) {
  p = PartSpec{};
  if (j.contains("shape")) j.at("shape").get_to(p.shape);
  if (j.contains("offset")) p.offset = {j.at("offset").at(0).get<double>(), j.at("offset").at(1).get<double>()};
  p.width = j.value("width", p.width);
  p.height = j.value("height", p.height);
  if (j.contains("hsv")) {
    const auto& c = j.at("hsv");
    p.color = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
  }
  p.pattern = j.value("pattern", p.pattern);
  p.stripes = j.value("stripes", p.stripes);
  p.stripe_period = j.value("stripe_period", p.stripe_period);
}

inline void to_json(nlohmann::json& j, const Waypoint& w) { j = {{"frame", w.frame}, {"x", w.x}, {"y", w.y}}; }

inline void from_json(const nlohmann::json& j, Waypoint& w) {
  j.at("frame").get_to(w.frame);
  j.at("x").get_to(w.x);
  j.at("y").get_to(w.y);
}

inline void to_json(nlohmann::json& j, const TargetSpec& t) {
  j = {{"id", t.id},
       {"parts", t.parts},
       {"trajectory", t.trajectory},
       {"perturbation", t.perturbation},
       {"perturbation_period", t.perturbation_period}};
}

inline void from_json(const nlohmann::json& j, TargetSpec& t) {
  t = TargetSpec{};
  j.at("id").get_to(t.id);
  j.at("parts").get_to(t.parts);
  if (j.contains("trajectory")) j.at("trajectory").get_to(t.trajectory);
  t.perturbation = j.value("perturbation", 0.0);
  t.perturbation_period = j.value("perturbation_period", t.perturbation_period);
}

inline void to_json(nlohmann::json& j, const SceneConfig& c) {
  j = {{"texture_seed", c.texture_seed},
       {"texture_cell", c.texture_cell},
       {"texture_octaves", c.texture_octaves},
       {"texture_contrast", c.texture_contrast},
       {"targets", c.targets},
       {"width", c.width},
       {"height", c.height},
       {"focal_px", c.focal_px},
       {"wall_distance", c.wall_distance},
       {"jitter", c.jitter},
       {"rotational_jitter", c.rotational_jitter},
       {"rotational_jitter_rad", c.rotational_jitter_rad},
       {"rng_seed", c.rng_seed}};
}

inline void from_json(const nlohmann::json& j, SceneConfig& c) {
  c = SceneConfig{};
  c.texture_seed = j.value("texture_seed", c.texture_seed);
  c.texture_cell = j.value("texture_cell", c.texture_cell);
  c.texture_octaves = j.value("texture_octaves", c.texture_octaves);
  c.texture_contrast = j.value("texture_contrast", c.texture_contrast);
  if (j.contains("targets")) j.at("targets").get_to(c.targets);
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  c.focal_px = j.value("focal_px", c.focal_px);
  c.wall_distance = j.value("wall_distance", c.wall_distance);
  c.jitter = j.value("jitter", c.jitter);
  c.rotational_jitter = j.value("rotational_jitter", c.rotational_jitter);
  c.rotational_jitter_rad = j.value("rotational_jitter_rad", c.rotational_jitter_rad);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  validate(c);
}

}  // namespace hexatrack::scene
