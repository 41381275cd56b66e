// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit code
// is the number of failures. Usage: acceptance [scratch_dir [criterion]]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hexatrack/hexatrack.hpp"
#include "hexatrack/teleop/server.hpp"
#include "../support/ws_client.hpp"

using namespace hexatrack;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // wall-clock limit
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path g_scratch;

// ---------------------------------------------------------------- 1
Outcome yaw_law() {
  ControllerParams p;
  p.th = 80.0;
  p.k_yaw = 2.18e-3;
  const double y = yaw_command(320.0, p);
  bool dead = true;
  for (int i = -8000; i <= 8000; ++i) dead = dead && yaw_command(i / 100.0, p) == 0.0;
  const bool ok = std::fabs(y - 0.5232) <= 1e-9 && dead;
  return {ok, fmt("yaw(320)=%.12f, zero on |d|<=80: %s", y, dead ? "yes" : "no")};
}

// ---------------------------------------------------------------- 2
Outcome consistency_metric() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-200.0, 200.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const EquivalencePair a{0, 0, {u(rng), u(rng)}};
    const EquivalencePair b{0, 0, {u(rng), u(rng)}};
    const double dx = a.motion.x - b.motion.x, dy = a.motion.y - b.motion.y;
    worst = std::max(worst, std::fabs(motion_consistency(a, b) - std::sqrt(dx * dx + dy * dy)));
  }
  return {worst <= 1e-12, fmt("max |err| over 1e4 pairs = %.3g", worst)};
}

// ---------------------------------------------------------------- 3
// Independent bit-packing oracle for the worked frame.
RcpFrame pack_by_hand(bool turn, bool gimbal, int dx, int dy) {
  std::string bits;
  bits += turn ? '1' : '0';
  bits += gimbal ? '1' : '0';
  for (int v : {dx, dy}) {
    bits += v > 0 ? '1' : '0';
    for (int b = 8; b >= 0; --b) bits += (std::abs(v) >> b) & 1 ? '1' : '0';
  }
  bits += "00";
  RcpFrame f{};
  for (int i = 0; i < 24; ++i)
    if (bits[static_cast<std::size_t>(i)] == '1') f[static_cast<std::size_t>(i / 8)] |= static_cast<std::uint8_t>(0x80 >> (i % 8));
  return f;
}

Outcome rcp_roundtrip() {
  std::size_t n = 0, bad = 0;
  for (int flags = 0; flags < 4; ++flags) {
    for (int dx = -511; dx <= 511; ++dx) {
      for (int dy = -511; dy <= 511; ++dy) {
        const RcpCommand c{(flags & 1) != 0, (flags & 2) != 0, dx, dy};
        bad += !(rcp_decode(rcp_encode(c)) == c);
        ++n;
      }
    }
  }
  const RcpFrame worked = rcp_encode({true, true, 100, -50});
  const bool frame_ok = worked == RcpFrame{0xE6, 0x40, 0xC8} && worked == pack_by_hand(true, true, 100, -50);
  return {bad == 0 && n == 4u * 1023u * 1023u && frame_ok,
          fmt("%zu commands, %zu mismatches; worked frame %02X %02X %02X", n, bad, worked[0], worked[1], worked[2])};
}

// ---------------------------------------------------------------- 4
// Real keypoints on a textured frame and its translated copy, plus a
// coherent foreground cluster of 20-40% of the matches.
Outcome motion_compensation() {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.5);
  const int trials = 200;
  int good = 0;
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    auto cfg = scene::empty_scene();
    cfg.texture_seed = 1000 + static_cast<std::uint64_t>(trial);
    const GrayImage a = to_grayscale(scene::render_frame(cfg, {}, 0.0, 0).first);
    const double r = 10.0 * std::sqrt(u(rng)), ang = 2.0 * kPi * u(rng);
    const double tx = r * std::cos(ang), ty = r * std::sin(ang);
    const GrayImage b = warp_affine(a, AffineTransform::translation(tx, ty));

    std::vector<MatchPair> pairs;
    for (const auto& m : symmetric_knn_match(detect_and_describe(a, 1000), detect_and_describe(b, 1000), 0.7)) {
      // points near the border see the warp's blank edge
      if (m.prev.x > 15 && m.prev.x < 625 && m.prev.y > 15 && m.prev.y < 465) pairs.push_back(m);
    }
    const double frac = 0.2 + 0.2 * u(rng);
    const auto n_fg = static_cast<std::size_t>(std::lround(frac / (1.0 - frac) * static_cast<double>(pairs.size())));
    const double ox = 100 + 440 * u(rng), oy = 100 + 280 * u(rng);
    const double vm = 3.0 + 17.0 * u(rng), va = 2.0 * kPi * u(rng);
    for (std::size_t k = 0; k < n_fg; ++k) {
      const Vec2 p{ox + 80.0 * (u(rng) - 0.5), oy + 120.0 * (u(rng) - 0.5)};
      pairs.push_back({p, {p.x + tx + vm * std::cos(va) + noise(rng), p.y + ty + vm * std::sin(va) + noise(rng)}});
    }
    std::shuffle(pairs.begin(), pairs.end(), rng);
    double err = 1e9;
    try {
      const auto res = adaptive_outlier_filter(pairs);
      const Vec2 c{320.0, 240.0};
      const Vec2 d = res.fit.apply(c);
      err = std::hypot(d.x - c.x - tx, d.y - c.y - ty);
    } catch (const Error&) {
    }
    worst = std::max(worst, err);
    good += err <= 0.5;
  }
  return {good >= 190, fmt("%d/%d trials within 0.5 px (need 190), worst %.3f px", good, trials, worst)};
}

// ---------------------------------------------------------------- 5
Outcome region_merging() {
  const int n = 50;
  const auto [fr, gt] = scene::generate_sequence(scene::preset("nonrigid"), std::vector<BodyPose>(n + 1), n + 1);
  MergeParams pinned;
  pinned.th1 = 30;
  pinned.th2 = 3000;
  pinned.th3 = 30;
  pinned.th4 = 8000;
  pinned.th5 = 50;
  pinned.th6 = 30;
  MotionDetector merged(pinned), split(MergeParams::disabled());
  int one = 0, two = 0;
  for (int i = 1; i <= n; ++i) {
    one += merged.detect_step(fr[i - 1], fr[i]).regions.size() == 1;
    two += split.detect_step(fr[i - 1], fr[i]).regions.size() >= 2;
  }
  return {one >= 45 && two >= 25, fmt("one region %d/%d (need 45); merging off, >=2 regions %d/%d (need 25)", one, n, two, n)};
}

// ---------------------------------------------------------------- 6
bool center_inside(const Box& b, const Box& g) {
  const Vec2 c = b.center();
  return c.x >= g.x && c.x <= g.x + g.w && c.y >= g.y && c.y <= g.y + g.h;
}

Outcome two_movers() {
  const int n = 50;
  const auto [fr, gt] = scene::generate_sequence(scene::preset("two_movers"), std::vector<BodyPose>(n + 1), n + 1);
  MotionDetector det;
  int both = 0, run = 0, longest = 0;
  for (int i = 1; i <= n; ++i) {
    const auto regions = det.detect_step(fr[i - 1], fr[i]).regions;
    auto covered = [&](int id) {
      const auto* t = gt[static_cast<std::size_t>(i)].find(id);
      return t && t->visible && std::any_of(regions.begin(), regions.end(), [&](const DetectedRegion& d) {
               return center_inside(d.region.bbox, t->box);
             });
    };
    both += covered(1) && covered(2);
    run = covered(3) ? run + 1 : 0;
    longest = std::max(longest, run);
  }
  return {both >= 45 && longest <= 3,
          fmt("both movers boxed %d/%d (need 45); longest run on static figure %d (max 3)", both, n, longest)};
}

// ---------------------------------------------------------------- 7
Outcome kcf() {
  const int n = 100;
  const auto [fr, gt] = scene::generate_sequence(scene::preset("tracking"), std::vector<BodyPose>(n + 1), n + 1);
  TrackState s = init_track(fr[0], gt[0].find(1)->box);
  double sum = 0.0;
  for (int i = 1; i <= n; ++i) {
    const Vec2 c = update_track(s, fr[static_cast<std::size_t>(i)]).box.center();
    const Vec2 g = gt[static_cast<std::size_t>(i)].find(1)->box.center();
    sum += std::hypot(c.x - g.x, c.y - g.y);
  }
  const double mean = sum / n;

  // Whole-frame integer shifts of a textured image.
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> sh(-10, 10);
  auto cfg = scene::empty_scene();
  cfg.texture_seed = 19;
  const GrayImage base = to_grayscale(scene::render_frame(cfg, {}, 0.0, 0).first);
  int exact = 0;
  const int shifts = 40;
  for (int k = 0; k < shifts; ++k) {
    const int dx = sh(rng), dy = sh(rng);
    GrayImage moved(base.width(), base.height());
    for (int y = 0; y < base.height(); ++y)
      for (int x = 0; x < base.width(); ++x)
        moved.at(x, y) = base.at(std::clamp(x - dx, 0, base.width() - 1), std::clamp(y - dy, 0, base.height() - 1));
    TrackState t = init_track(base, {280, 200, 48, 64});
    const Vec2 d = update_track(t, moved).displacement;
    exact += std::fabs(d.x - dx) <= 1.0 && std::fabs(d.y - dy) <= 1.0;
  }
  return {mean <= 2.0 && exact == shifts,
          fmt("mean centre error %.3f px over %d frames (max 2); shifts recovered %d/%d", mean, n, exact, shifts)};
}

// ---------------------------------------------------------------- 8
struct OffsetRow {
  int frame;
  std::string mode;
  bool has_dx;
  double dx;
};

std::vector<OffsetRow> read_offsets(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<OffsetRow> rows;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string f, mode, dx;
    std::getline(ls, f, ',');
    std::getline(ls, mode, ',');
    std::getline(ls, dx, ',');
    rows.push_back({std::stoi(f), mode, !dx.empty(), dx.empty() ? 0.0 : std::stod(dx)});
  }
  return rows;
}

Outcome closed_loop() {
  const fs::path out = g_scratch / "closed_loop";
  fs::create_directories(out);
  SimulateOptions opt;
  opt.scene = scene::preset("offset_trace");
  opt.frames = 330;
  opt.plot = true;
  run_simulate(opt, out);
  const auto rows = read_offsets(out / "offsets.csv");

  const teleop::SessionConfig defaults;
  const double frames_per_cycle =
      kPhasesPerCycle / (defaults.gait.phases_per_second * defaults.tick_seconds);
  const double k = ControllerParams{}.k_yaw;
  auto bound_frames = [&](double dx0) {
    return (std::ceil((std::fabs(dx0) - 80.0) * k / (kPi / 12.0)) + 2.0) * frames_per_cycle;
  };
  const bool all_tracking = std::all_of(rows.begin() + 1, rows.end(), [](const OffsetRow& r) {
    return r.mode == "tracking" && r.has_dx;
  });
  if (rows.size() != 330 || !all_tracking) return {false, "run did not stay in tracking"};

  // Phase 1: start at dx ~ +200; target still until frame 120.
  const double dx0 = rows[1].dx;
  int enter = -1;
  for (const auto& r : rows)
    if (r.frame >= 1 && std::fabs(r.dx) <= 80.0) {
      enter = r.frame;
      break;
    }
  bool held = enter > 0;
  for (const auto& r : rows)
    if (enter > 0 && r.frame >= enter && r.frame <= 120) held = held && std::fabs(r.dx) <= 80.0;
  const bool first_ok = dx0 > 150.0 && enter > 0 && enter <= bound_frames(dx0) && held;

  // While the target walks away the dead band lets it sit just outside 80.
  double chase = 0.0;
  for (const auto& r : rows)
    if (r.frame > 120 && r.frame <= 250) chase = std::max(chase, std::fabs(r.dx));

  // Phase 2: target turns round at 250 and stops at 300.
  double most_negative = 0.0;
  for (const auto& r : rows)
    if (r.frame > 250) most_negative = std::min(most_negative, r.dx);
  const bool flipped = most_negative < -80.0;
  const double dx_stop = rows[300].dx;
  int reenter = -1;
  for (const auto& r : rows)
    if (r.frame >= 300 && std::fabs(r.dx) <= 80.0) {
      reenter = r.frame;
      break;
    }
  bool stays = reenter > 0;
  for (const auto& r : rows)
    if (reenter > 0 && r.frame >= reenter) stays = stays && std::fabs(r.dx) <= 80.0;
  const bool second_ok = flipped && reenter > 0 && reenter - 300 <= bound_frames(dx_stop) && stays;

  return {first_ok && second_ok,
          fmt("dx0=%.1f in band at frame %d (bound %.0f), held to 120: %s; max |dx| while target walks %.1f; "
              "after reversal min dx %.1f, back in band at %d (bound 300+%.0f), held: %s",
              dx0, enter, bound_frames(dx0), held ? "yes" : "no", chase, most_negative, reenter, bound_frames(dx_stop),
              stays ? "yes" : "no")};
}

// ---------------------------------------------------------------- 9
// Independent bookkeeping: latest turn request wins, each turn cycle takes
// at most pi/12 of it, a straight cycle moves one stride along the heading.
Outcome gait_invariants() {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> action(0, 9);
  std::uniform_real_distribution<double> turn(-0.7, 0.7);
  const GaitParams gp;
  int violations = 0;
  double worst_pose = 0.0;
  std::size_t steps = 0;
  for (int seq = 0; seq < 10000; ++seq) {
    GaitState s;
    BodyPose pose;
    double ox = 0.0, oy = 0.0, oh = 0.0, pending = 0.0, amount = 0.0;
    std::array<int, kLegCount> stance_phases{};
    const int length = 20 + static_cast<int>(rng() % 60);
    for (int a = 0; a < length; ++a) {
      switch (action(rng)) {
        case 0: s = begin_straight(s); break;
        case 1: s = begin_single_cycle(s); break;
        case 2: s = stop_straight(s); break;
        case 3: {
          const double d = rng() % 5 == 0 ? 0.0 : turn(rng);
          s = begin_turn(s, d);
          if (d != 0.0) pending = d;
          break;
        }
        case 4:
          s = cancel_turn(s);
          pending = 0.0;
          break;
        default: {
          const GaitMode mode = s.mode;
          const GaitStep st = step_gait(s, pose, gp);
          s = st.state;
          pose = st.pose;
          ++steps;
          if (stance_count(s.stance) < 3 || stance_count(st.stance) < 3) ++violations;
          if (mode == GaitMode::idle) break;
          if (s.phase == 0) stance_phases.fill(0);
          for (int leg = 0; leg < kLegCount; ++leg) stance_phases[static_cast<std::size_t>(leg)] += (st.stance >> leg) & 1;
          if (mode == GaitMode::turning && s.phase == 0) {
            amount = std::clamp(pending, -kMaxTurnPerCycle, kMaxTurnPerCycle);
            pending -= amount;
          }
          if (s.phase == kPhasesPerCycle - 1) {
            for (int c : stance_phases) violations += c != 3;
            if (mode == GaitMode::straight) {
              ox += gp.stride * std::cos(oh);
              oy += gp.stride * std::sin(oh);
            } else {
              oh += amount;
            }
            const double dh = std::remainder(pose.heading - oh, 2.0 * kPi);
            worst_pose = std::max({worst_pose, std::fabs(pose.x - ox), std::fabs(pose.y - oy), std::fabs(dh)});
          }
        }
      }
    }
  }
  return {violations == 0 && worst_pose <= 1e-12,
          fmt("10000 sequences, %zu steps: %d stance/duty violations, max pose error %.3g", steps, violations, worst_pose)};
}

// ---------------------------------------------------------------- 10
Outcome bench_ordering() {
  const BenchResult r = run_bench(30);
  std::string d;
  for (const auto& e : r.entries) d += fmt("%s detect %.2f fps track %.2f fps; ", e.preset.c_str(), e.detect_fps, e.track_fps);
  d += fmt("simple>complex %s, track>detect %s, track gap<detect gap %s", r.detect_simple_faster ? "yes" : "no",
           r.track_faster_than_detect ? "yes" : "no", r.track_gap_smaller ? "yes" : "no");
  return {r.ordering_holds(), d};
}

// ---------------------------------------------------------------- 11
Outcome service() {
  using namespace std::chrono_literals;
  teleop::SessionConfig cfg;
  cfg.world = scene::preset("tracking");
  teleop::Server srv(cfg, {"127.0.0.1", 0, 10.0});
  srv.start();
  testsupport::WsClient client(srv.port());
  auto kind_is = [](const char* k) { return [k](const json& j) { return j.is_object() && j.value("kind", "") == k; }; };
  auto status_mode = [](const char* m) {
    return [m](const json& j) { return j.is_object() && j.value("kind", "") == "STATUS" && j.value("mode", "") == m; };
  };
  std::vector<std::string> notes;
  bool ok = client.wait_for(kind_is("FRAME"), 10s).has_value();

  // The operator picks the person.
  const Box box = srv.with_session([](teleop::Session& s) { return s.last_truth()->find(1)->box; });
  std::size_t mark = client.count();
  client.send(json{{"kind", "SELECT_TARGET"}, {"box", teleop::box_json(box)}});
  const bool tracking = client.wait_for(status_mode("tracking"), 10s, mark).has_value();
  ok = ok && tracking;
  notes.push_back(fmt("tracking STATUS %s", tracking ? "yes" : "no"));

  // Let the controller issue a few orders, then take over.
  const auto t_wait = Clock::now();
  while (Clock::now() - t_wait < 15s &&
         srv.with_session([](teleop::Session& s) { return s.rcp_log().size(); }) < 3)
    std::this_thread::sleep_for(50ms);
  mark = client.count();
  client.send(json{{"kind", "SET_MODE"}, {"mode", "manual"}});
  const bool manual = client.wait_for(status_mode("manual"), 10s, mark).has_value();
  const auto [before, frame_at] = srv.with_session([](teleop::Session& s) {
    std::size_t n = 0;
    for (const auto& e : s.rcp_log()) n += e.origin == teleop::RcpOrigin::controller;
    return std::pair{n, s.frame()};
  });
  client.send(json{{"kind", "MANUAL_CMD"}, {"direction", "right"}});
  std::this_thread::sleep_for(3s);
  const auto [after, in_manual, frame_now] = srv.with_session([](teleop::Session& s) {
    std::size_t n = 0, m = 0;
    for (const auto& e : s.rcp_log()) {
      n += e.origin == teleop::RcpOrigin::controller;
      m += e.origin == teleop::RcpOrigin::controller && e.mode == teleop::Mode::manual;
    }
    return std::tuple{n, m, s.frame()};
  });
  const bool silent = manual && before > 0 && after == before && in_manual == 0 && frame_now > frame_at + 10;
  ok = ok && silent;
  notes.push_back(fmt("controller RCP before manual %zu, after %zu over %lld ticks", before, after,
                      static_cast<long long>(frame_now - frame_at)));

  // Garbage: an ERROR back, session carries on.
  mark = client.count();
  client.send(std::string("{\"kind\": \"SELECT_TARG"));
  const bool error = client.wait_for(kind_is("ERROR"), 10s, mark).has_value();
  const std::int64_t f0 = srv.with_session([](teleop::Session& s) { return s.frame(); });
  mark = client.count();
  client.send(json{{"kind", "PING"}});
  const auto pong = client.wait_for(status_mode("manual"), 10s, mark);
  std::this_thread::sleep_for(500ms);
  const std::int64_t f1 = srv.with_session([](teleop::Session& s) { return s.frame(); });
  const bool survived = error && pong.has_value() && f1 > f0 && !client.closed();
  ok = ok && survived;
  notes.push_back(fmt("malformed -> ERROR %s, still serving %s", error ? "yes" : "no", survived ? "yes" : "no"));

  client.close();
  srv.stop();
  std::string d;
  for (const auto& n : notes) d += n + "; ";
  return {ok, d};
}

}  // namespace

int main(int argc, char** argv) {
  g_scratch = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "hexatrack_acceptance";
  fs::create_directories(g_scratch);

  const std::vector<Criterion> all = {
      {1, "yaw law", 1.0, yaw_law},
      {2, "motion consistency", 5.0, consistency_metric},
      {3, "rcp round trip", 30.0, rcp_roundtrip},
      {4, "motion compensation", 60.0, motion_compensation},
      {5, "region merging", 120.0, region_merging},
      {6, "two movers", 120.0, two_movers},
      {7, "kcf", 60.0, kcf},
      {8, "closed loop", 120.0, closed_loop},
      {9, "gait invariants", 30.0, gait_invariants},
      {10, "bench ordering", 300.0, bench_ordering},
      {11, "service", 60.0, service},
  };
  int failures = 0, ran = 0;
  for (const auto& c : all) {
    if (argc > 2 && std::to_string(c.id) != argv[2]) continue;
    ++ran;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s %2d %-20s %7.2fs (limit %.0fs)  %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs, c.budget_s,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failures, ran);
  return failures;
}
