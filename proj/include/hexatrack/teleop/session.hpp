#pragma once

// The processor loop: render -> detect or track -> control -> RCP -> gait,
// plus operator message handling. Single writer; the server drives it from
// one thread and feeds it operator messages between ticks.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hexatrack/controller.hpp"
#include "hexatrack/error.hpp"
#include "hexatrack/gait_sim.hpp"
#include "hexatrack/image_io.hpp"
#include "hexatrack/kcf_track.hpp"
#include "hexatrack/params.hpp"
#include "hexatrack/rcp.hpp"
#include "hexatrack/region_detect.hpp"
#include "hexatrack/scene_sim.hpp"
#include "hexatrack/teleop/messages.hpp"

namespace hexatrack::teleop {

constexpr double kMaxGimbalPitch = std::numbers::pi / 4.0;
constexpr double kManualPitchStep = std::numbers::pi / 36.0;
constexpr double kManualTurn = std::numbers::pi / 12.0;

enum class ImageMode { none, png, file };

struct SessionConfig {
  scene::SceneConfig world;
  GaitParams gait;
  double tick_seconds = 0.1;  // simulated time per tick
  MergeParams merge;
  DetectionConfig detection;
  ControllerParams controller;
  KcfParams kcf;
  ImageMode image = ImageMode::none;
  std::filesystem::path image_dir;  // ImageMode::file
  std::ostream* event_log = nullptr;  // JSON-lines, not owned
  std::size_t rcp_log_limit = 100000;
};

enum class RcpOrigin { controller, operator_ };

inline const char* origin_name(RcpOrigin o) { return o == RcpOrigin::controller ? "controller" : "operator"; }

struct RcpLogEntry {
  std::int64_t frame = 0;
  RcpOrigin origin = RcpOrigin::controller;
  Mode mode = Mode::monitoring;  // session mode when sent
  RcpFrame bytes{};
  RcpCommand decoded;
};

/// Messages produced by one call: `reply` goes to the sender only,
/// `broadcast` to every client.
struct Outbox {
  std::vector<nlohmann::json> reply;
  std::vector<nlohmann::json> broadcast;
};

inline std::string hex_bytes(std::span<const std::uint8_t> b) {
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (auto v : b) os << std::setw(2) << static_cast<int>(v);
  return os.str();
}

class Session {
 public:
  explicit Session(SessionConfig cfg)
      : cfg_(std::move(cfg)), detector_(cfg_.merge, cfg_.detection) {
    scene::validate(cfg_.world);
    cfg_.controller.validate();
    cfg_.kcf.validate();
    if (!(cfg_.tick_seconds > 0.0)) throw Error(Errc::invalid_parameter, "tick length must be positive");
    if (!(cfg_.gait.phases_per_second > 0.0)) throw Error(Errc::invalid_parameter, "phase rate must be positive");
    if (cfg_.image == ImageMode::file && cfg_.image_dir.empty()) {
      throw Error(Errc::invalid_parameter, "file image mode needs a directory");
    }
  }

  // --- observers
  Mode mode() const noexcept { return mode_; }
  const BodyPose& pose() const noexcept { return pose_; }
  const GaitState& gait() const noexcept { return gait_; }
  double gimbal_pitch() const noexcept { return pitch_; }
  std::int64_t frame() const noexcept { return frame_; }  // next frame to render
  const std::optional<TrackState>& track() const noexcept { return track_; }
  const std::optional<PixelOffset>& last_offset() const noexcept { return offset_; }
  const std::optional<scene::GroundTruthEntry>& last_truth() const noexcept { return truth_; }
  const std::vector<DetectedRegion>& last_detections() const noexcept { return detections_; }
  const std::deque<RcpLogEntry>& rcp_log() const noexcept { return rcp_log_; }
  const MergeParams& merge_params() const noexcept { return detector_.merge_params(); }
  const DetectionConfig& detection_config() const noexcept { return detector_.config(); }
  const ControllerParams& controller_params() const noexcept { return cfg_.controller; }
  const JointCommand& joints() const noexcept { return joints_; }
  double last_tick_ms() const noexcept { return tick_ms_; }
  const SessionConfig& config() const noexcept { return cfg_; }

  nlohmann::json status() const {
    return {{"kind", "STATUS"},
            {"frame", frame_},
            {"mode", mode_name(mode_)},
            {"pose", {{"x", pose_.x}, {"y", pose_.y}, {"theta", pose_.heading}}},
            {"gimbal_pitch", pitch_},
            {"gait", {{"mode", gait_mode_name(gait_.mode)}, {"phase", gait_.phase}, {"cycle", gait_.cycle}}},
            {"tracking", track_.has_value()},
            {"fps", fps_}};
  }

  // --- operator side

  /// Parses and applies one raw message. Malformed input only produces an
  /// ERROR for the sender.
  Outbox handle_raw(std::string_view raw) {
    OperatorMessage m;
    try {
      m = parse_operator_message(raw);
    } catch (const std::exception& e) {
      log_event({{"event", "error"}, {"text", e.what()}, {"source", "parse"}});
      return {{make_error(e.what())}, {}};
    }
    return handle(m);
  }

  Outbox handle(const OperatorMessage& m) {
    log_event({{"event", "message"}, {"message", to_json(m)}});
    try {
      switch (m.kind) {
        case OperatorKind::ping: return {{status()}, {}};
        case OperatorKind::select_target: select_target(m.box); break;
        case OperatorKind::set_mode: set_mode(m.mode, "operator"); break;
        case OperatorKind::manual_cmd: manual(m.direction); break;
        case OperatorKind::set_params: set_params(m.params); break;
      }
    } catch (const Error& e) {
      log_event({{"event", "error"}, {"text", e.what()}, {"source", operator_kind_name(m.kind)}});
      return {{make_error(e.what())}, {}};
    }
    return {{}, {status()}};
  }

  // --- loop

  /// Renders the next frame and runs the mode's pipeline on it.
  Outbox tick() {
    const auto t0 = std::chrono::steady_clock::now();
    Outbox out;
    advance_gait_to(frame_);
    auto [img, truth] = scene::render_frame(cfg_.world, pose_, pitch_, frame_);
    truth_ = truth;
    detections_.clear();
    offset_.reset();

    if (mode_ == Mode::tracking) {
      track_step(img, out);
    } else if (prev_frame_) {
      for (auto& d : detector_.detect_step(*prev_frame_, img).regions) detections_.push_back(std::move(d));
    }

    FramePayload payload;
    payload.frame = frame_;
    payload.image = frame_image(img);
    for (const auto& d : detections_) payload.detections.push_back(d.region.bbox);
    if (track_) payload.track = track_->box;
    if (offset_) payload.offset = Vec2{offset_->dx, offset_->dy};

    prev_frame_ = std::move(img);
    ++frame_;
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    tick_ms_ = ms;
    fps_ = fps_ == 0.0 ? 1000.0 / std::max(ms, 1e-3) : 0.9 * fps_ + 0.1 * 1000.0 / std::max(ms, 1e-3);
    out.broadcast.push_back(make_frame(payload));
    out.broadcast.push_back(status());
    return out;
  }

  /// Last rendered frame, if any.
  const std::optional<Frame>& last_frame() const noexcept { return prev_frame_; }

 private:
  void log_event(nlohmann::json j) {
    if (!cfg_.event_log) return;
    j["frame"] = frame_;
    *cfg_.event_log << j.dump() << '\n';
    cfg_.event_log->flush();
  }

  // Gait runs on simulated time: frame n is seen at n * tick_seconds.
  void advance_gait_to(std::int64_t n) {
    const auto target = static_cast<std::int64_t>(
        std::floor(static_cast<double>(n) * cfg_.tick_seconds * cfg_.gait.phases_per_second + 1e-9));
    while (phases_done_ < target) {
      const GaitStep st = step_gait(gait_, pose_, cfg_.gait, pitch_);
      gait_ = st.state;
      pose_ = st.pose;
      joints_ = st.joints;
      ++phases_done_;
    }
  }

  FrameImage frame_image(const Frame& img) const {
    switch (cfg_.image) {
      case ImageMode::none: return {};
      case ImageMode::png: return {FrameImage::Kind::png, base64_encode(io::encode_png(img))};
      case ImageMode::file: {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%06lld.png", static_cast<long long>(frame_));
        const auto path = cfg_.image_dir / name;
        io::write_png(path, img);
        return {FrameImage::Kind::file, path.string()};
      }
    }
    return {};
  }

  void set_mode(Mode m, const char* reason) {
    if (m == mode_) return;
    if (m == Mode::tracking && !track_) throw Error(Errc::mode_error, "tracking needs a selected target");
    const Mode from = mode_;
    if (from == Mode::tracking) track_.reset();
    if (m == Mode::manual) {
      // Operator takes over: drop whatever turn the controller queued.
      gait_ = cancel_turn(gait_);
    }
    if (m == Mode::monitoring) detector_.reset();
    mode_ = m;
    log_event({{"event", "mode"}, {"from", mode_name(from)}, {"to", mode_name(m)}, {"reason", reason}});
  }

  void select_target(const Box& box) {
    if (!prev_frame_) throw Error(Errc::mode_error, "no frame rendered yet");
    validate_box(box, prev_frame_->width(), prev_frame_->height());
    TrackState t = init_track(*prev_frame_, box, cfg_.kcf);
    if (mode_ == Mode::tracking) track_.reset();
    const Mode from = mode_;
    track_ = std::move(t);
    mode_ = Mode::tracking;
    if (from != Mode::tracking) {
      log_event({{"event", "mode"}, {"from", mode_name(from)}, {"to", "tracking"}, {"reason", "operator"}});
    }
  }

  void manual(ManualDirection d) {
    set_mode(Mode::manual, "operator");
    switch (d) {
      case ManualDirection::forward: gait_ = begin_single_cycle(cancel_turn(gait_)); break;
      case ManualDirection::left: gait_ = begin_turn(gait_, -kManualTurn); break;
      case ManualDirection::right: gait_ = begin_turn(gait_, kManualTurn); break;
      case ManualDirection::cam_up: pitch_ = std::max(pitch_ - kManualPitchStep, -kMaxGimbalPitch); break;
      case ManualDirection::cam_down: pitch_ = std::min(pitch_ + kManualPitchStep, kMaxGimbalPitch); break;
      case ManualDirection::stop: gait_ = stop_straight(cancel_turn(gait_)); break;
    }
    log_event({{"event", "manual"}, {"direction", direction_name(d)}});
  }

  // All values are checked before anything changes.
  void set_params(const std::map<std::string, double>& values) {
    const TunableParams next =
        apply_params({detector_.merge_params(), detector_.config(), cfg_.controller}, values);
    detector_.set_merge_params(next.merge);
    detector_.set_config(next.detection);
    cfg_.controller = next.controller;
  }

  void lose_target(const std::string& why, Outbox& out) {
    out.broadcast.push_back(make_error("target lost: " + why));
    log_event({{"event", "error"}, {"text", "target lost: " + why}, {"source", "tracker"}});
    set_mode(Mode::monitoring, "lost_target");
  }

  void track_step(const Frame& img, Outbox& out) {
    try {
      update_track(*track_, img);
    } catch (const Error& e) {
      if (e.code() != Errc::lost_target) throw;
      lose_target(e.what(), out);
      return;
    }
    const Vec2 c = track_->box.center();
    if (c.x < 0.0 || c.y < 0.0 || c.x >= img.width() || c.y >= img.height()) {
      lose_target("box left the frame", out);
      return;
    }
    offset_ = offset_of(track_->box, img.width(), img.height());
    // New orders only between cycles; a turn in flight is left to finish.
    if (gait_.mode == GaitMode::turning || !gait_.at_cycle_boundary()) return;
    const auto clamp_px = [](double v) {
      return static_cast<int>(std::clamp<long>(std::lround(v), -kRcpMaxMagnitude, kRcpMaxMagnitude));
    };
    RcpCommand cmd;
    cmd.dx = clamp_px(offset_->dx);
    cmd.dy = clamp_px(offset_->dy);
    cmd.turn_flag = yaw_command(cmd.dx, cfg_.controller) != 0.0;
    cmd.gimbal_flag = pitch_command(cmd.dy, cfg_.controller) != 0.0;
    send_rcp(cmd, RcpOrigin::controller);
  }

  // Processor -> robot over the framed byte stream, then the robot acts on
  // what it decoded.
  void send_rcp(const RcpCommand& cmd, RcpOrigin origin) {
    std::vector<std::uint8_t> wire;
    rcp_write(wire, cmd);
    RcpLogEntry entry{frame_, origin, mode_, rcp_encode(cmd), {}};
    for (const RcpCommand& got : robot_link_.feed(wire)) {
      entry.decoded = got;
      robot_apply(got);
    }
    log_event({{"event", "rcp"},
               {"origin", origin_name(origin)},
               {"mode", mode_name(mode_)},
               {"bytes", hex_bytes(entry.bytes)},
               {"turn", entry.decoded.turn_flag},
               {"gimbal", entry.decoded.gimbal_flag},
               {"dx", entry.decoded.dx},
               {"dy", entry.decoded.dy}});
    rcp_log_.push_back(entry);
    while (rcp_log_.size() > cfg_.rcp_log_limit) rcp_log_.pop_front();
  }

  void robot_apply(const RcpCommand& c) {
    if (c.turn_flag) {
      gait_ = begin_turn(gait_, yaw_command(c.dx, cfg_.controller));
    } else {
      gait_ = cancel_turn(gait_);
    }
    if (c.gimbal_flag) {
      pitch_ = std::clamp(pitch_ + pitch_command(c.dy, cfg_.controller), -kMaxGimbalPitch, kMaxGimbalPitch);
    }
  }

  SessionConfig cfg_;
  MotionDetector detector_;
  Mode mode_ = Mode::monitoring;
  GaitState gait_;
  BodyPose pose_;
  JointCommand joints_{};
  double pitch_ = 0.0;
  std::int64_t frame_ = 0;
  std::int64_t phases_done_ = 0;
  std::optional<Frame> prev_frame_;
  std::optional<TrackState> track_;
  std::optional<PixelOffset> offset_;
  std::optional<scene::GroundTruthEntry> truth_;
  std::vector<DetectedRegion> detections_;
  RcpStreamReader robot_link_;
  std::deque<RcpLogEntry> rcp_log_;
  double tick_ms_ = 0.0;
  double fps_ = 0.0;
};

}  // namespace hexatrack::teleop
