#pragma once

// Tripod gait state machine. Legs R1..R3 form one tripod, L1..L3 the other.
// A cycle is six phases: R lift, L push (body moves), R drop, L lift,
// R push (body moves), L drop. A group is off the ground from its lift
// through its drop, so each leg stands for exactly three phases.
//
// Turning happens in place and only between straight cycles.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <utility>

#include "hexatrack/error.hpp"
#include "hexatrack/pose.hpp"

namespace hexatrack {

enum class GaitMode { idle, straight, turning };

inline const char* gait_mode_name(GaitMode m) {
  switch (m) {
    case GaitMode::idle: return "idle";
    case GaitMode::straight: return "straight";
    case GaitMode::turning: return "turning";
  }
  return "?";
}

enum Leg : int { R1 = 0, R2, R3, L1, L2, L3 };
constexpr int kLegCount = 6;
constexpr std::uint8_t kGroupR = 0b000111;
constexpr std::uint8_t kGroupL = 0b111000;
constexpr std::uint8_t kAllLegs = kGroupR | kGroupL;

constexpr int kPhasesPerCycle = 6;
constexpr double kMaxTurnPerCycle = std::numbers::pi / 12.0;

struct GaitParams {
  double stride = 0.05;              // world units per straight cycle
  double phases_per_second = 6.0;
  double max_turn_per_cycle = kMaxTurnPerCycle;
};

struct GaitState {
  int phase = kPhasesPerCycle - 1;   // last completed phase; 5 = between cycles
  GaitMode mode = GaitMode::idle;
  std::uint8_t stance = kAllLegs;    // bit per Leg
  double pending_turn = 0.0;         // rad still to turn
  double cycle_turn = 0.0;           // rad being turned in the current cycle
  double cycle_start_heading = 0.0;
  bool walking = false;              // resume straight walking after a turn
  std::int64_t cycle = 0;            // completed cycles

  bool at_cycle_boundary() const { return phase == kPhasesPerCycle - 1; }
};

/// 18 leg joints (coxa, femur, tibia per leg, in Leg order) then gimbal pan
/// and gimbal pitch.
using JointCommand = std::array<double, 20>;
constexpr int kGimbalPanJoint = 18;
constexpr int kGimbalPitchJoint = 19;

inline int stance_count(std::uint8_t stance) { return std::popcount(static_cast<unsigned>(stance)); }

/// Legs on the ground during `phase` of a moving cycle.
inline std::uint8_t stance_for_phase(int phase) { return phase < 3 ? kGroupL : kGroupR; }

namespace detail {

// Fixed postures. Airborne legs go lift -> swing -> drop; grounded legs
// sweep back through their push.
inline JointCommand joint_pose(int phase, GaitMode mode, double gimbal_pitch) {
  JointCommand j{};
  if (mode != GaitMode::idle) {
    for (int leg = 0; leg < kLegCount; ++leg) {
      const bool right = leg < L1;
      const int local = right ? phase : (phase + 3) % kPhasesPerCycle;  // 0..2 airborne
      double coxa = 0.0, femur = 0.0, tibia = 0.0;
      switch (local) {
        case 0: coxa = -0.25; femur = 0.6; tibia = -0.4; break;
        case 1: coxa = 0.25; femur = 0.6; tibia = -0.4; break;
        case 2: coxa = 0.25; femur = 0.0; tibia = 0.0; break;
        case 3: coxa = 0.25; break;
        case 4: coxa = 0.0; break;
        default: coxa = -0.25; break;
      }
      // In a centre turn the two sides sweep in opposite directions.
      if (mode == GaitMode::turning && !right) coxa = -coxa;
      j[static_cast<std::size_t>(leg * 3)] = coxa;
      j[static_cast<std::size_t>(leg * 3 + 1)] = femur;
      j[static_cast<std::size_t>(leg * 3 + 2)] = tibia;
    }
  }
  j[kGimbalPanJoint] = 0.0;
  j[kGimbalPitchJoint] = std::clamp(gimbal_pitch, -std::numbers::pi / 2, std::numbers::pi / 2);
  return j;
}

inline void finish_turn_cycle(GaitState& s) {
  s.cycle_turn = 0.0;
  if (s.pending_turn == 0.0) s.mode = s.walking ? GaitMode::straight : GaitMode::idle;
  if (s.mode == GaitMode::idle) s.stance = kAllLegs;
}

}  // namespace detail

/// Starts (or keeps) straight walking.
inline GaitState begin_straight(GaitState s) {
  s.walking = true;
  if (s.mode == GaitMode::idle) s.mode = GaitMode::straight;
  return s;
}

/// Walks one straight cycle, then stops.
inline GaitState begin_single_cycle(GaitState s) {
  s.walking = false;
  if (s.mode == GaitMode::idle) s.mode = GaitMode::straight;
  return s;
}

/// Stops walking at the end of the current cycle.
inline GaitState stop_straight(GaitState s) {
  s.walking = false;
  if (s.mode == GaitMode::straight && s.at_cycle_boundary()) {
    s.mode = GaitMode::idle;
    s.stance = kAllLegs;
  }
  return s;
}

/// Requests a centre turn of dtheta rad, replacing any pending request.
inline GaitState begin_turn(GaitState s, double dtheta) {
  if (dtheta == 0.0) return s;
  s.pending_turn = dtheta;
  if (s.mode == GaitMode::idle || (s.mode == GaitMode::straight && s.at_cycle_boundary())) {
    s.mode = GaitMode::turning;
  }
  return s;
}

/// Drops any turn not yet started; a cycle in progress still completes.
inline GaitState cancel_turn(GaitState s) {
  s.pending_turn = 0.0;
  if (s.mode == GaitMode::turning && s.at_cycle_boundary()) detail::finish_turn_cycle(s);
  return s;
}

struct GaitStep {
  GaitState state;
  BodyPose pose;
  JointCommand joints{};
  std::uint8_t stance = kAllLegs;  // legs down during the phase just run
};

inline GaitStep advance_phase(GaitState s, BodyPose pose, double stride, double gimbal_pitch = 0.0) {
  if (s.mode != GaitMode::straight) throw Error(Errc::mode_error, "advance_phase needs straight mode");
  s.phase = (s.phase + 1) % kPhasesPerCycle;
  s.stance = stance_for_phase(s.phase);
  if (s.phase == 1 || s.phase == 4) {
    pose.x += 0.5 * stride * std::cos(pose.heading);
    pose.y += 0.5 * stride * std::sin(pose.heading);
  }
  const JointCommand j = detail::joint_pose(s.phase, GaitMode::straight, gimbal_pitch);
  const std::uint8_t down = s.stance;
  if (s.at_cycle_boundary()) {
    ++s.cycle;
    if (s.pending_turn != 0.0) {
      s.mode = GaitMode::turning;
    } else if (!s.walking) {
      s.mode = GaitMode::idle;
      s.stance = kAllLegs;
    }
  }
  return {s, pose, j, down};
}

/// One phase of a centre turn. The cycle's amount is fixed when it starts;
/// heading moves a sixth of it per phase and lands exactly at the end.
inline GaitStep advance_turn(GaitState s, BodyPose pose, double gimbal_pitch = 0.0,
                             double max_turn = kMaxTurnPerCycle) {
  if (s.mode != GaitMode::turning) throw Error(Errc::mode_error, "advance_turn needs turning mode");
  s.phase = (s.phase + 1) % kPhasesPerCycle;
  s.stance = stance_for_phase(s.phase);
  if (s.phase == 0) {
    s.cycle_turn = std::clamp(s.pending_turn, -max_turn, max_turn);
    s.pending_turn -= s.cycle_turn;
    s.cycle_start_heading = pose.heading;
  }
  const JointCommand j = detail::joint_pose(s.phase, GaitMode::turning, gimbal_pitch);
  const std::uint8_t down = s.stance;
  if (s.at_cycle_boundary()) {
    pose.heading = normalize_angle(s.cycle_start_heading + s.cycle_turn);
    ++s.cycle;
    detail::finish_turn_cycle(s);
  } else {
    pose.heading = normalize_angle(s.cycle_start_heading + s.cycle_turn * (s.phase + 1) / kPhasesPerCycle);
  }
  return {s, pose, j, down};
}

/// Advances whichever mode is active; idle only refreshes the joints.
inline GaitStep step_gait(GaitState s, BodyPose pose, const GaitParams& p, double gimbal_pitch = 0.0) {
  switch (s.mode) {
    case GaitMode::straight: return advance_phase(s, pose, p.stride, gimbal_pitch);
    case GaitMode::turning: return advance_turn(s, pose, gimbal_pitch, p.max_turn_per_cycle);
    case GaitMode::idle: break;
  }
  return {s, pose, detail::joint_pose(s.phase, GaitMode::idle, gimbal_pitch), s.stance};
}

/// Pose trace: cycle,phase,x,y,theta,stance
inline void write_pose_header(std::ostream& os) { os << "cycle,phase,x,y,theta,stance\n"; }

inline void write_pose_row(std::ostream& os, const GaitState& s, const BodyPose& p) {
  os << s.cycle << ',' << s.phase << ',' << p.x << ',' << p.y << ',' << p.heading << ','
     << static_cast<int>(s.stance) << '\n';
}

}  // namespace hexatrack
