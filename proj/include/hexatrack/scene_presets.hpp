#pragma once

// Named scene configurations used by the CLI, the benchmarks and the
// acceptance suite.

#include <string>
#include <string_view>
#include <vector>

#include "hexatrack/error.hpp"
#include "hexatrack/scene_sim.hpp"

namespace hexatrack::scene {

// Patterned cloth, no bars. Plenty of texture for the diff and a few corners.
inline PartSpec clothing(PartShape shape, Vec2 offset, double w, double h, HsvColor color) {
  return {shape, offset, w, h, color, 70.0, 0.0, 12.0};
}

/// "Person": head, torso and legs of the same hue, stacked vertically.
inline TargetSpec person(int id, HsvColor color, std::vector<Waypoint> path, double sway = 0.0) {
  TargetSpec t;
  t.id = id;
  t.parts = {
      clothing(PartShape::ellipse, {0.0, -38.0}, 22.0, 22.0, {color.h, color.s * 0.6, color.v}),
      clothing(PartShape::rect, {0.0, -2.0}, 36.0, 48.0, color),
      clothing(PartShape::rect, {0.0, 36.0}, 30.0, 26.0, {color.h, color.s, color.v * 0.8}),
  };
  t.trajectory = std::move(path);
  t.perturbation = sway;
  return t;
}

inline SceneConfig empty_scene() {
  SceneConfig cfg;
  cfg.jitter = 0.0;
  return cfg;
}

/// Low-detail background, one mover. Fewer keypoints to match per frame.
inline SceneConfig simple_preset() {
  SceneConfig cfg;
  cfg.texture_seed = 11;
  cfg.texture_cell = 40.0;
  cfg.texture_octaves = 3;
  cfg.texture_contrast = 0.9;
  cfg.jitter = 2.0;
  cfg.targets = {person(1, {150.0, 190.0, 170.0}, {{0, 160, 240}, {400, 1360, 240}})};
  return cfg;
}

/// Busy background and three movers.
inline SceneConfig complex_preset() {
  SceneConfig cfg;
  cfg.texture_seed = 23;
  cfg.texture_cell = 24.0;
  cfg.texture_octaves = 5;
  cfg.texture_contrast = 1.3;
  cfg.jitter = 3.0;
  cfg.targets = {
      person(1, {150.0, 190.0, 170.0}, {{0, 140, 150}, {400, 1340, 150}}),
      person(2, {20.0, 200.0, 210.0}, {{0, 520, 330}, {400, -680, 330}}),
      person(3, {220.0, 150.0, 200.0}, {{0, 320, 250}, {200, 380, 230}, {400, 320, 250}}),
  };
  return cfg;
}

/// Two people walking towards each other on separate lanes while a third
/// sits still, seen through a shaking camera.
inline SceneConfig two_movers_scenario() {
  SceneConfig cfg;
  cfg.texture_seed = 5;
  cfg.texture_cell = 32.0;
  cfg.texture_octaves = 4;
  cfg.jitter = 3.0;
  cfg.rng_seed = 99;
  cfg.targets = {
      person(1, {150.0, 200.0, 170.0}, {{0, 110, 140}, {60, 410, 140}}, 1.5),
      person(2, {15.0, 210.0, 170.0}, {{0, 540, 350}, {60, 240, 350}}, 1.5),
  };
  TargetSpec seated;
  seated.id = 3;
  seated.parts = {
      {PartShape::ellipse, {0.0, -24.0}, 20.0, 20.0, {100.0, 120.0, 190.0}, 40.0},
      {PartShape::rect, {0.0, 8.0}, 40.0, 44.0, {100.0, 190.0, 170.0}, 45.0},
  };
  seated.trajectory = {{0, 540, 235}};
  cfg.targets.push_back(seated);
  return cfg;
}

/// One target made of two separated same-colour parts that sway
/// independently. Without merging it falls apart into two regions.
inline SceneConfig nonrigid_scenario() {
  SceneConfig cfg;
  cfg.texture_seed = 41;
  cfg.texture_cell = 32.0;
  cfg.texture_octaves = 4;
  cfg.jitter = 2.0;
  cfg.rng_seed = 3;
  TargetSpec t;
  t.id = 1;
  t.parts = {
      {PartShape::rect, {0.0, -10.0}, 32.0, 14.0, {170.0, 210.0, 200.0}, 20.0},
      {PartShape::rect, {0.0, 10.0}, 32.0, 14.0, {170.0, 210.0, 200.0}, 20.0},
  };
  t.trajectory = {{0, 150, 240}, {60, 450, 240}};
  t.perturbation = 2.5;
  t.perturbation_period = 14.0;
  cfg.targets = {t};
  return cfg;
}

/// Single tracked person: still for a while, walks off to the right, then
/// turns round, crosses the view leftwards and stops.
inline SceneConfig offset_trace_scenario() {
  SceneConfig cfg;
  cfg.texture_seed = 77;
  cfg.texture_cell = 32.0;
  cfg.texture_octaves = 4;
  cfg.jitter = 1.0;
  cfg.rng_seed = 12;
  cfg.texture_contrast = 0.7;
  cfg.targets = {person(1, {40.0, 200.0, 235.0},
                        {{0, 520, 240}, {120, 520, 240}, {250, 780, 240}, {300, 480, 240}, {330, 480, 240}})};
  return cfg;
}

/// Static camera, one textured person translating 3 px per frame.
inline SceneConfig tracking_scenario() {
  SceneConfig cfg;
  cfg.texture_seed = 31;
  cfg.texture_cell = 32.0;
  cfg.texture_octaves = 4;
  cfg.texture_contrast = 0.7;
  cfg.jitter = 0.0;
  cfg.targets = {person(1, {40.0, 200.0, 235.0}, {{0, 170, 240}, {100, 470, 240}})};
  return cfg;
}

inline std::vector<std::string> preset_names() {
  return {"empty", "simple", "complex", "two_movers", "nonrigid", "offset_trace", "tracking"};
}

inline SceneConfig preset(std::string_view name) {
  if (name == "empty") return empty_scene();
  if (name == "simple") return simple_preset();
  if (name == "complex") return complex_preset();
  if (name == "two_movers") return two_movers_scenario();
  if (name == "nonrigid") return nonrigid_scenario();
  if (name == "offset_trace") return offset_trace_scenario();
  if (name == "tracking") return tracking_scenario();
  throw Error(Errc::not_found, "unknown scene preset: " + std::string(name));
}

}  // namespace hexatrack::scene
