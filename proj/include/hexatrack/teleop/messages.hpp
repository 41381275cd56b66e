#pragma once

// Operator <-> server wire messages. Every message is a JSON object with a
// "kind" tag.
//
// operator -> server
//   {"kind":"SELECT_TARGET","box":{"x":..,"y":..,"w":..,"h":..}}
//   {"kind":"SET_MODE","mode":"monitoring"|"tracking"|"manual"}
//   {"kind":"MANUAL_CMD","direction":"forward"|"left"|"right"|"cam_up"|"cam_down"|"stop"}
//   {"kind":"SET_PARAMS","params":{"th1":50,...}}
//   {"kind":"PING"}
// server -> operator
//   FRAME, STATUS, ERROR (see make_* below)

#include <boost/beast/core/detail/base64.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hexatrack/error.hpp"
#include "hexatrack/image.hpp"

namespace hexatrack::teleop {

enum class Mode { monitoring, tracking, manual };
enum class ManualDirection { forward, left, right, cam_up, cam_down, stop };
enum class OperatorKind { select_target, set_mode, manual_cmd, set_params, ping };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::monitoring: return "monitoring";
    case Mode::tracking: return "tracking";
    case Mode::manual: return "manual";
  }
  return "?";
}

inline const char* direction_name(ManualDirection d) {
  switch (d) {
    case ManualDirection::forward: return "forward";
    case ManualDirection::left: return "left";
    case ManualDirection::right: return "right";
    case ManualDirection::cam_up: return "cam_up";
    case ManualDirection::cam_down: return "cam_down";
    case ManualDirection::stop: return "stop";
  }
  return "?";
}

inline const char* operator_kind_name(OperatorKind k) {
  switch (k) {
    case OperatorKind::select_target: return "SELECT_TARGET";
    case OperatorKind::set_mode: return "SET_MODE";
    case OperatorKind::manual_cmd: return "MANUAL_CMD";
    case OperatorKind::set_params: return "SET_PARAMS";
    case OperatorKind::ping: return "PING";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "monitoring") return Mode::monitoring;
  if (s == "tracking") return Mode::tracking;
  if (s == "manual") return Mode::manual;
  return std::nullopt;
}

inline std::optional<ManualDirection> parse_direction(std::string_view s) {
  for (auto d : {ManualDirection::forward, ManualDirection::left, ManualDirection::right, ManualDirection::cam_up,
                 ManualDirection::cam_down, ManualDirection::stop}) {
    if (s == direction_name(d)) return d;
  }
  return std::nullopt;
}

struct OperatorMessage {
  OperatorKind kind = OperatorKind::ping;
  Box box;                               // SELECT_TARGET
  Mode mode = Mode::monitoring;          // SET_MODE
  ManualDirection direction = ManualDirection::stop;  // MANUAL_CMD
  std::map<std::string, double> params;  // SET_PARAMS
};

/// Smallest selectable box side, px.
constexpr double kMinSelectSide = 4.0;

inline void validate_box(const Box& b, int width = kFrameWidth, int height = kFrameHeight) {
  if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.w) || !std::isfinite(b.h)) {
    throw Error(Errc::invalid_parameter, "box has non-finite fields");
  }
  if (b.w < kMinSelectSide || b.h < kMinSelectSide || b.area() < 16.0) {
    throw Error(Errc::invalid_parameter, "box too small");
  }
  if (b.x < 0.0 || b.y < 0.0 || b.x + b.w > width || b.y + b.h > height) {
    throw Error(Errc::invalid_parameter, "box outside the frame");
  }
}

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name)) throw Error(Errc::malformed_frame, std::string("missing field: ") + name);
  return j.at(name);
}

inline double number(const nlohmann::json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number()) throw Error(Errc::malformed_frame, std::string("field is not a number: ") + name);
  return v.get<double>();
}

inline std::string text(const nlohmann::json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) throw Error(Errc::malformed_frame, std::string("field is not a string: ") + name);
  return v.get<std::string>();
}

}  // namespace detail

/// Parses and checks the shape of an operator message. Range checks on
/// parameter values are left to the session, which knows the names.
inline OperatorMessage parse_operator_message(std::string_view raw) {
  const auto j = nlohmann::json::parse(raw, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::malformed_frame, "message is not a JSON object");
  const std::string kind = detail::text(j, "kind");
  OperatorMessage m;
  if (kind == "SELECT_TARGET") {
    m.kind = OperatorKind::select_target;
    const auto& b = detail::field(j, "box");
    if (!b.is_object()) throw Error(Errc::malformed_frame, "box must be an object");
    m.box = {detail::number(b, "x"), detail::number(b, "y"), detail::number(b, "w"), detail::number(b, "h")};
  } else if (kind == "SET_MODE") {
    m.kind = OperatorKind::set_mode;
    const auto mode = parse_mode(detail::text(j, "mode"));
    if (!mode) throw Error(Errc::invalid_parameter, "unknown mode");
    m.mode = *mode;
  } else if (kind == "MANUAL_CMD") {
    m.kind = OperatorKind::manual_cmd;
    const auto dir = parse_direction(detail::text(j, "direction"));
    if (!dir) throw Error(Errc::invalid_parameter, "unknown direction");
    m.direction = *dir;
  } else if (kind == "SET_PARAMS") {
    m.kind = OperatorKind::set_params;
    const auto& p = detail::field(j, "params");
    if (!p.is_object() || p.empty()) throw Error(Errc::malformed_frame, "params must be a non-empty object");
    for (const auto& [name, value] : p.items()) {
      if (!value.is_number()) throw Error(Errc::malformed_frame, "parameter is not a number: " + name);
      m.params[name] = value.get<double>();
    }
  } else if (kind == "PING") {
    m.kind = OperatorKind::ping;
  } else {
    throw Error(Errc::malformed_frame, "unknown message kind: " + kind);
  }
  return m;
}

inline nlohmann::json to_json(const OperatorMessage& m) {
  nlohmann::json j{{"kind", operator_kind_name(m.kind)}};
  switch (m.kind) {
    case OperatorKind::select_target:
      j["box"] = {{"x", m.box.x}, {"y", m.box.y}, {"w", m.box.w}, {"h", m.box.h}};
      break;
    case OperatorKind::set_mode: j["mode"] = mode_name(m.mode); break;
    case OperatorKind::manual_cmd: j["direction"] = direction_name(m.direction); break;
    case OperatorKind::set_params: j["params"] = m.params; break;
    case OperatorKind::ping: break;
  }
  return j;
}

inline nlohmann::json box_json(const Box& b) { return {{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}}; }

inline std::string base64_encode(std::span<const std::uint8_t> bytes) {
  namespace b64 = boost::beast::detail::base64;
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view text) {
  namespace b64 = boost::beast::detail::base64;
  // decode stops at the padding
  for (int i = 0; i < 2 && !text.empty() && text.back() == '='; ++i) text.remove_suffix(1);
  std::vector<std::uint8_t> out(b64::decoded_size(text.size()) + 3);
  const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
  if (read != text.size()) throw Error(Errc::malformed_frame, "invalid base64");
  out.resize(written);
  return out;
}

struct FrameImage {
  enum class Kind { none, png, file } kind = Kind::none;
  std::string payload;  // base64 PNG or file path
};

struct FramePayload {
  std::int64_t frame = 0;
  FrameImage image;
  std::vector<Box> detections;
  std::optional<Box> track;
  std::optional<Vec2> offset;  // only while tracking
};

inline nlohmann::json make_frame(const FramePayload& f) {
  nlohmann::json j{{"kind", "FRAME"}, {"frame", f.frame}};
  switch (f.image.kind) {
    case FrameImage::Kind::none: j["image"] = nullptr; break;
    case FrameImage::Kind::png: j["image"] = {{"encoding", "png"}, {"data", f.image.payload}}; break;
    case FrameImage::Kind::file: j["image"] = {{"encoding", "file"}, {"path", f.image.payload}}; break;
  }
  auto boxes = nlohmann::json::array();
  for (const auto& b : f.detections) boxes.push_back(box_json(b));
  j["detections"] = std::move(boxes);
  j["track"] = f.track ? box_json(*f.track) : nlohmann::json(nullptr);
  if (f.offset) j["offset"] = {{"dx", f.offset->x}, {"dy", f.offset->y}};
  return j;
}

inline nlohmann::json make_error(std::string_view text) { return {{"kind", "ERROR"}, {"text", text}}; }

}  // namespace hexatrack::teleop
