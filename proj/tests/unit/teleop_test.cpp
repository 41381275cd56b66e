#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hexatrack/params.hpp"
#include "hexatrack/scene_presets.hpp"
#include "hexatrack/teleop/messages.hpp"
#include "hexatrack/teleop/session.hpp"

using namespace hexatrack;
using namespace hexatrack::teleop;
using nlohmann::json;

namespace {

SessionConfig config_for(const std::string& preset) {
  SessionConfig c;
  c.world = scene::preset(preset);
  return c;
}

const json* find_kind(const std::vector<json>& msgs, const std::string& kind) {
  for (const auto& m : msgs)
    if (m.value("kind", "") == kind) return &m;
  return nullptr;
}

Box target_box(const Session& s, int id = 1) {
  const auto* t = s.last_truth()->find(id);
  EXPECT_NE(t, nullptr);
  return t->box;
}

}  // namespace

TEST(Messages, ParsesEveryKind) {
  auto m = parse_operator_message(R"({"kind":"SELECT_TARGET","box":{"x":1,"y":2,"w":30,"h":40}})");
  EXPECT_EQ(m.kind, OperatorKind::select_target);
  EXPECT_EQ(m.box, (Box{1, 2, 30, 40}));
  m = parse_operator_message(R"({"kind":"SET_MODE","mode":"manual"})");
  EXPECT_EQ(m.mode, Mode::manual);
  m = parse_operator_message(R"({"kind":"MANUAL_CMD","direction":"cam_up"})");
  EXPECT_EQ(m.direction, ManualDirection::cam_up);
  m = parse_operator_message(R"({"kind":"SET_PARAMS","params":{"th1":50,"k_yaw":0.002}})");
  EXPECT_EQ(m.params.at("th1"), 50.0);
  EXPECT_EQ(parse_operator_message(R"({"kind":"PING"})").kind, OperatorKind::ping);
}

TEST(Messages, RoundTripThroughJson) {
  for (const char* raw : {R"({"kind":"SELECT_TARGET","box":{"x":1.5,"y":2.0,"w":30.0,"h":40.0}})",
                          R"({"kind":"SET_MODE","mode":"tracking"})", R"({"kind":"MANUAL_CMD","direction":"left"})",
                          R"({"kind":"SET_PARAMS","params":{"th":90.0}})", R"({"kind":"PING"})"}) {
    EXPECT_EQ(to_json(parse_operator_message(raw)), json::parse(raw)) << raw;
  }
}

TEST(Messages, RejectsBadInput) {
  for (const char* raw : {"", "not json", "[1,2]", "{}", R"({"kind":"DANCE"})", R"({"kind":"SELECT_TARGET"})",
                          R"({"kind":"SELECT_TARGET","box":{"x":"a","y":0,"w":1,"h":1}})",
                          R"({"kind":"SET_MODE","mode":"sleep"})", R"({"kind":"MANUAL_CMD","direction":"up"})",
                          R"({"kind":"SET_PARAMS","params":{}})", R"({"kind":"SET_PARAMS","params":{"th1":"x"}})",
                          R"({"kind":7})"}) {
    EXPECT_THROW(parse_operator_message(raw), Error) << raw;
  }
}

TEST(Messages, BoxValidation) {
  EXPECT_NO_THROW(validate_box({0, 0, 640, 480}));
  EXPECT_THROW(validate_box({600, 10, 50, 50}), Error);
  EXPECT_THROW(validate_box({-1, 10, 50, 50}), Error);
  EXPECT_THROW(validate_box({10, 10, 3, 50}), Error);
  EXPECT_THROW(validate_box({10, 10, NAN, 50}), Error);
}

TEST(Messages, FrameShape) {
  FramePayload p;
  p.frame = 12;
  p.detections = {{1, 2, 3, 4}};
  const json j = make_frame(p);
  EXPECT_EQ(j["kind"], "FRAME");
  EXPECT_EQ(j["frame"], 12);
  EXPECT_TRUE(j["image"].is_null());
  EXPECT_TRUE(j["track"].is_null());
  EXPECT_FALSE(j.contains("offset"));
  EXPECT_EQ(j["detections"][0]["w"], 3.0);
  p.offset = Vec2{5, -6};
  EXPECT_EQ(make_frame(p)["offset"]["dy"], -6.0);
  EXPECT_EQ(make_error("x"), (json{{"kind", "ERROR"}, {"text", "x"}}));
}

TEST(Messages, Base64) {
  const std::vector<std::uint8_t> bytes = {0, 1, 2, 250, 251, 255, 7};
  EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
  EXPECT_EQ(base64_encode(std::vector<std::uint8_t>{'M', 'a', 'n'}), "TWFu");
  EXPECT_THROW(base64_decode("@@@@"), Error);
}

TEST(Params, AppliesInRange) {
  const TunableParams p = apply_params({}, {{"th1", 50}, {"th", 100}, {"diff_threshold", 20}, {"min_area", 5}});
  EXPECT_EQ(p.merge.th1, 50.0);
  EXPECT_EQ(p.controller.th, 100.0);
  EXPECT_EQ(p.detection.diff_threshold, 20);
  EXPECT_EQ(p.detection.min_area, 5u);
  EXPECT_EQ(p.merge.th2, MergeParams{}.th2);
}

TEST(Params, RejectsOutOfRangeAndUnknown) {
  const std::vector<std::pair<std::string, double>> bad = {
      {"th1", -1},    {"th", 320},   {"k_yaw", 0},      {"k_pitch", 0.2}, {"diff_threshold", 0},
      {"diff_threshold", 2.5}, {"blur_sigma", 0}, {"min_area", 0}, {"th7", 1}, {"th1", INFINITY}};
  for (const auto& [name, v] : bad) {
    try {
      apply_params({}, {{name, v}});
      FAIL() << name << "=" << v;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::invalid_parameter);
    }
  }
  EXPECT_EQ(tunable_names().size(), 12u);
  EXPECT_THROW(read_params_json(json::array()), Error);
  EXPECT_THROW(read_params_json(json{{"th1", "a"}}), Error);
  EXPECT_THROW(load_params_file("/nonexistent/params.json"), Error);
}

TEST(Session, StartsInMonitoringAndTicks) {
  Session s(config_for("empty"));
  EXPECT_EQ(s.mode(), Mode::monitoring);
  for (int i = 0; i < 4; ++i) {
    const Outbox o = s.tick();
    EXPECT_TRUE(o.reply.empty());
    const json* f = find_kind(o.broadcast, "FRAME");
    ASSERT_NE(f, nullptr);
    EXPECT_EQ((*f)["frame"], i);
    EXPECT_TRUE((*f)["detections"].empty());
    EXPECT_FALSE(f->contains("offset"));
    EXPECT_NE(find_kind(o.broadcast, "STATUS"), nullptr);
  }
  EXPECT_TRUE(s.rcp_log().empty());
}

TEST(Session, PingRepliesWithStatus) {
  Session s(config_for("empty"));
  const Outbox o = s.handle_raw(R"({"kind":"PING"})");
  ASSERT_EQ(o.reply.size(), 1u);
  EXPECT_EQ(o.reply[0]["kind"], "STATUS");
  EXPECT_EQ(o.reply[0]["mode"], "monitoring");
  EXPECT_TRUE(o.broadcast.empty());
}

TEST(Session, GarbageGivesErrorToSenderOnly) {
  Session s(config_for("empty"));
  s.tick();
  const Outbox o = s.handle_raw("{{{{");
  ASSERT_EQ(o.reply.size(), 1u);
  EXPECT_EQ(o.reply[0]["kind"], "ERROR");
  EXPECT_TRUE(o.broadcast.empty());
  EXPECT_EQ(s.mode(), Mode::monitoring);
  EXPECT_NO_THROW(s.tick());
}

TEST(Session, SelectOutsideFrameIsRejected) {
  Session s(config_for("tracking"));
  // Before any frame there is nothing to select on.
  EXPECT_EQ(s.handle_raw(R"({"kind":"SELECT_TARGET","box":{"x":10,"y":10,"w":40,"h":40}})").reply[0]["kind"],
            "ERROR");
  s.tick();
  const Outbox o = s.handle_raw(R"({"kind":"SELECT_TARGET","box":{"x":620,"y":10,"w":40,"h":40}})");
  ASSERT_EQ(o.reply.size(), 1u);
  EXPECT_EQ(o.reply[0]["kind"], "ERROR");
  EXPECT_EQ(s.mode(), Mode::monitoring);
  EXPECT_FALSE(s.track().has_value());
}

TEST(Session, TrackingNeedsATarget) {
  Session s(config_for("tracking"));
  s.tick();
  const Outbox o = s.handle_raw(R"({"kind":"SET_MODE","mode":"tracking"})");
  EXPECT_EQ(o.reply.at(0)["kind"], "ERROR");
  EXPECT_EQ(s.mode(), Mode::monitoring);
}

TEST(Session, SelectStartsTrackingAndReportsOffset) {
  Session s(config_for("tracking"));
  s.tick();
  OperatorMessage m;
  m.kind = OperatorKind::select_target;
  m.box = target_box(s);
  const Outbox o = s.handle(m);
  EXPECT_TRUE(o.reply.empty());
  ASSERT_EQ(o.broadcast.size(), 1u);
  EXPECT_EQ(o.broadcast[0]["mode"], "tracking");
  EXPECT_EQ(o.broadcast[0]["tracking"], true);
  EXPECT_EQ(s.mode(), Mode::tracking);

  for (int i = 0; i < 20; ++i) {
    const Outbox t = s.tick();
    const json* f = find_kind(t.broadcast, "FRAME");
    ASSERT_NE(f, nullptr);
    ASSERT_TRUE(f->contains("offset"));
    ASSERT_FALSE((*f)["track"].is_null());
    const Box gt = target_box(s);
    EXPECT_NEAR((*f)["offset"]["dx"].get<double>(), gt.center().x - 320.0, 8.0);
  }
  // Controller orders go out at cycle boundaries only.
  ASSERT_FALSE(s.rcp_log().empty());
  for (const auto& e : s.rcp_log()) {
    EXPECT_EQ(e.origin, RcpOrigin::controller);
    EXPECT_EQ(e.decoded, rcp_decode(e.bytes));
  }

  // Back to monitoring drops the track and the offset.
  s.handle_raw(R"({"kind":"SET_MODE","mode":"monitoring"})");
  EXPECT_FALSE(s.track().has_value());
  EXPECT_FALSE(find_kind(s.tick().broadcast, "FRAME")->contains("offset"));
}

TEST(Session, SetParamsTakesEffect) {
  Session s(config_for("empty"));
  const Outbox o = s.handle_raw(R"({"kind":"SET_PARAMS","params":{"th1":50,"diff_threshold":25}})");
  EXPECT_TRUE(o.reply.empty());
  EXPECT_EQ(s.merge_params().th1, 50.0);
  EXPECT_EQ(s.detection_config().diff_threshold, 25);

  // One bad value leaves everything untouched.
  const Outbox bad = s.handle_raw(R"({"kind":"SET_PARAMS","params":{"th1":10,"th":-5}})");
  EXPECT_EQ(bad.reply.at(0)["kind"], "ERROR");
  EXPECT_EQ(s.merge_params().th1, 50.0);
  EXPECT_EQ(s.controller_params().th, 80.0);
  EXPECT_EQ(s.handle_raw(R"({"kind":"SET_PARAMS","params":{"bogus":1}})").reply.at(0)["kind"], "ERROR");
}

TEST(Session, ManualSilencesController) {
  Session s(config_for("offset_trace"));
  s.tick();
  OperatorMessage m;
  m.kind = OperatorKind::select_target;
  m.box = target_box(s);
  s.handle(m);
  for (int i = 0; i < 30; ++i) s.tick();
  const std::size_t before = s.rcp_log().size();
  ASSERT_GT(before, 0u);

  s.handle_raw(R"({"kind":"MANUAL_CMD","direction":"left"})");
  EXPECT_EQ(s.mode(), Mode::manual);
  EXPECT_FALSE(s.track().has_value());
  const double h0 = s.pose().heading;
  for (int i = 0; i < 30; ++i) {
    const Outbox o = s.tick();
    EXPECT_FALSE(find_kind(o.broadcast, "FRAME")->contains("offset"));
  }
  EXPECT_EQ(s.rcp_log().size(), before);
  EXPECT_NEAR(s.pose().heading - h0, -kManualTurn, 1e-9);

  s.handle_raw(R"({"kind":"MANUAL_CMD","direction":"cam_down"})");
  EXPECT_NEAR(s.gimbal_pitch(), kManualPitchStep, 1e-12);
  for (int i = 0; i < 20; ++i) s.handle_raw(R"({"kind":"MANUAL_CMD","direction":"cam_down"})");
  EXPECT_NEAR(s.gimbal_pitch(), kMaxGimbalPitch, 1e-12);

  const BodyPose p0 = s.pose();
  s.handle_raw(R"({"kind":"MANUAL_CMD","direction":"forward"})");
  for (int i = 0; i < 15; ++i) s.tick();
  EXPECT_GT(std::hypot(s.pose().x - p0.x, s.pose().y - p0.y), 0.0);
  EXPECT_EQ(s.gait().mode, GaitMode::idle);
}

TEST(Session, LostTargetFallsBackToMonitoring) {
  auto cfg = config_for("empty");
  scene::TargetSpec t;
  t.id = 1;
  t.parts = {{scene::PartShape::rect, {0, 0}, 40, 60, {40, 200, 235}, 25.0}};
  t.trajectory = {{0, 560, 240}, {40, 900, 240}};
  cfg.world.targets = {t};
  // Wide dead band: the robot holds still and the target walks out of view.
  cfg.controller.th = 319.0;
  Session s(cfg);
  s.tick();
  OperatorMessage m;
  m.kind = OperatorKind::select_target;
  m.box = target_box(s);
  s.handle(m);
  bool lost = false;
  for (int i = 0; i < 60 && !lost; ++i) {
    const Outbox o = s.tick();
    if (s.mode() == Mode::monitoring) {
      lost = true;
      const json* e = find_kind(o.broadcast, "ERROR");
      ASSERT_NE(e, nullptr);
      EXPECT_NE((*e)["text"].get<std::string>().find("target lost"), std::string::npos);
    }
  }
  EXPECT_TRUE(lost);
  EXPECT_FALSE(s.track().has_value());
  EXPECT_NO_THROW(s.tick());
}

TEST(Session, EventLogIsJsonLines) {
  std::ostringstream log;
  auto cfg = config_for("tracking");
  cfg.event_log = &log;
  Session s(cfg);
  s.tick();
  s.handle_raw("nope");
  OperatorMessage m;
  m.kind = OperatorKind::select_target;
  m.box = target_box(s);
  s.handle(m);
  for (int i = 0; i < 12; ++i) s.tick();
  s.handle_raw(R"({"kind":"SET_MODE","mode":"manual"})");

  std::istringstream in(log.str());
  std::string line;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    ASSERT_TRUE(j.contains("event"));
    ASSERT_TRUE(j.contains("frame"));
    ++seen[j["event"].get<std::string>()];
    if (j["event"] == "rcp") {
      EXPECT_EQ(j["bytes"].get<std::string>().size(), 6u);
      EXPECT_EQ(j["origin"], "controller");
    }
  }
  EXPECT_GE(seen["error"], 1);
  EXPECT_GE(seen["message"], 2);
  EXPECT_EQ(seen["mode"], 2);
  EXPECT_GE(seen["rcp"], 1);
}

TEST(Session, PngFrames) {
  auto cfg = config_for("empty");
  cfg.image = ImageMode::png;
  Session s(cfg);
  const Outbox o = s.tick();
  const json* f = find_kind(o.broadcast, "FRAME");
  ASSERT_EQ((*f)["image"]["encoding"], "png");
  const auto bytes = base64_decode((*f)["image"]["data"].get<std::string>());
  ASSERT_GT(bytes.size(), 8u);
  EXPECT_EQ(bytes[1], 'P');
  EXPECT_EQ(bytes[2], 'N');
}

TEST(Session, ConfigValidation) {
  auto cfg = config_for("empty");
  cfg.tick_seconds = 0;
  EXPECT_THROW(Session{cfg}, Error);
  cfg = config_for("empty");
  cfg.image = ImageMode::file;
  EXPECT_THROW(Session{cfg}, Error);
}
