#pragma once

// Batch entry points behind the CLI: detect, simulate, bench.
// Outputs are staged in a hidden directory and moved into place only when
// the whole run succeeded.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "hexatrack/error.hpp"
#include "hexatrack/image_io.hpp"
#include "hexatrack/kcf_track.hpp"
#include "hexatrack/params.hpp"
#include "hexatrack/plot.hpp"
#include "hexatrack/region_detect.hpp"
#include "hexatrack/scene_presets.hpp"
#include "hexatrack/scene_sim.hpp"
#include "hexatrack/teleop/session.hpp"

namespace hexatrack {

namespace fs = std::filesystem;

struct RunReport {
  std::int64_t frames = 0;
  double detect_ms = 0.0;
  double track_ms = 0.0;
  double total_ms = 0.0;
  std::vector<fs::path> outputs;
  nlohmann::json details = nlohmann::json::object();

  double fps() const { return total_ms > 0.0 ? 1000.0 * static_cast<double>(frames) / total_ms : 0.0; }
};

inline void to_json(nlohmann::json& j, const RunReport& r) {
  std::vector<std::string> outs;
  for (const auto& p : r.outputs) outs.push_back(p.string());
  j = {{"frames", r.frames},       {"detect_ms", r.detect_ms}, {"track_ms", r.track_ms},
       {"total_ms", r.total_ms},   {"fps", r.fps()},           {"outputs", outs},
       {"details", r.details}};
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

class Staging {
 public:
  explicit Staging(const fs::path& out) : out_(out) {
    if (!fs::is_directory(out)) throw Error(Errc::io_error, "output directory does not exist: " + out.string());
    std::random_device rd;
    dir_ = out / (".staging-" + std::to_string(rd()));
    std::error_code ec;
    if (!fs::create_directory(dir_, ec) || ec) {
      throw Error(Errc::io_error, "output directory is not writable: " + out.string());
    }
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;
  ~Staging() {
    std::error_code ec;
    if (!committed_) fs::remove_all(dir_, ec);
  }

  fs::path file(const std::string& name) {
    names_.push_back(name);
    return dir_ / name;
  }

  std::ofstream open(const std::string& name) {
    std::ofstream os(file(name));
    if (!os) throw Error(Errc::io_error, "cannot write " + (dir_ / name).string());
    return os;
  }

  std::vector<fs::path> commit() {
    std::vector<fs::path> done;
    for (const auto& n : names_) {
      const fs::path dst = out_ / n;
      if (fs::is_directory(dst)) fs::remove_all(dst);
      fs::rename(dir_ / n, dst);
      done.push_back(dst);
    }
    fs::remove_all(dir_);
    committed_ = true;
    return done;
  }

 private:
  fs::path out_;
  fs::path dir_;
  std::vector<std::string> names_;
  bool committed_ = false;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

inline std::string frame_name(std::int64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06lld.png", static_cast<long long>(n));
  return buf;
}

}  // namespace detail

/// Sorted .png/.ppm files of a directory.
inline std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::io_error, "input directory does not exist: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && (ext == ".png" || ext == ".ppm")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct DetectOptions {
  std::optional<scene::SceneConfig> scene;  // render this, or
  fs::path input_dir;                       // read frames from here
  std::size_t frames = 50;                  // 0 = every file in input_dir
  unsigned jobs = 1;
  bool annotate = true;
  TunableParams params;
};

/// Region CSV: frame,region,x,y,w,h,area,cx,cy,mx,my (mx,my empty when the
/// region had no partner in the previous frame).
inline RunReport run_detect(const DetectOptions& opt, const fs::path& out_dir) {
  const auto t_start = detail::Clock::now();
  detail::Staging stage(out_dir);
  std::vector<Frame> frames;
  std::optional<scene::GroundTruth> truth;
  if (opt.scene) {
    if (opt.frames < 2) throw Error(Errc::invalid_parameter, "detection needs at least 2 frames");
    auto [f, gt] = scene::generate_sequence(*opt.scene, std::vector<BodyPose>(opt.frames), opt.frames, opt.jobs);
    frames = std::move(f);
    truth = std::move(gt);
  } else {
    auto files = list_frames(opt.input_dir);
    if (opt.frames > 0 && files.size() > opt.frames) files.resize(opt.frames);
    if (files.size() < 2) throw Error(Errc::insufficient_data, "need at least 2 input frames in " + opt.input_dir.string());
    for (std::size_t i = 0; i < files.size(); ++i) {
      frames.push_back(io::read_frame(files[i]));
      frames.back().set_index(static_cast<std::int64_t>(i));
      if (frames.back().width() != frames.front().width() || frames.back().height() != frames.front().height()) {
        throw Error(Errc::dimension_mismatch, "input frames differ in size: " + files[i].string());
      }
    }
  }

  RunReport rep;
  MotionDetector det(opt.params.merge, opt.params.detection);
  auto csv = stage.open("regions.csv");
  csv << "frame,region,x,y,w,h,area,cx,cy,mx,my\n";
  fs::path annotated;
  if (opt.annotate) {
    annotated = stage.file("annotated");
    fs::create_directory(annotated);
  }
  std::vector<std::size_t> counts;
  for (std::size_t n = 0; n < frames.size(); ++n) {
    std::vector<DetectedRegion> regions;
    if (n > 0) {
      const auto t0 = detail::Clock::now();
      regions = det.detect_step(frames[n - 1], frames[n]).regions;
      rep.detect_ms += detail::ms_since(t0);
    }
    counts.push_back(regions.size());
    for (std::size_t k = 0; k < regions.size(); ++k) {
      const Region& r = regions[k].region;
      csv << n << ',' << k << ',' << r.bbox.x << ',' << r.bbox.y << ',' << r.bbox.w << ',' << r.bbox.h << ',' << r.area
          << ',' << r.centroid.x << ',' << r.centroid.y << ',';
      if (regions[k].motion) csv << regions[k].motion->x << ',' << regions[k].motion->y;
      else csv << ',';
      csv << '\n';
    }
    if (opt.annotate) {
      Frame a = frames[n];
      for (const auto& r : regions) io::draw_rect(a, r.region.bbox, io::kGreen);
      io::write_png(annotated / detail::frame_name(static_cast<std::int64_t>(n)), a);
    }
  }
  csv.close();
  if (!csv) throw Error(Errc::io_error, "failed writing regions.csv");
  if (truth) {
    auto gt = stage.open("ground_truth.csv");
    scene::write_ground_truth_csv(gt, *truth);
  }
  rep.frames = static_cast<std::int64_t>(frames.size());
  rep.details["regions_per_frame"] = counts;
  rep.outputs = stage.commit();
  rep.total_ms = detail::ms_since(t_start);
  return rep;
}

struct SimulateOptions {
  scene::SceneConfig scene;
  int target_id = 1;
  std::size_t frames = 300;
  TunableParams params;
  bool plot = true;
};

/// Closed-loop run: the target's true box at frame 0 is selected, then the
/// session tracks and steers on its own.
/// offsets.csv: frame,mode,dx,dy,gt_dx,gt_dy   pose.csv: cycle,phase,x,y,theta,stance
inline RunReport run_simulate(const SimulateOptions& opt, const fs::path& out_dir) {
  const auto t_start = detail::Clock::now();
  if (opt.frames < 2) throw Error(Errc::invalid_parameter, "simulation needs at least 2 frames");
  const bool known = std::any_of(opt.scene.targets.begin(), opt.scene.targets.end(),
                                 [&](const scene::TargetSpec& t) { return t.id == opt.target_id; });
  if (!known) throw Error(Errc::not_found, "unknown target id: " + std::to_string(opt.target_id));
  detail::Staging stage(out_dir);

  auto events = stage.open("events.jsonl");
  teleop::SessionConfig cfg;
  cfg.world = opt.scene;
  cfg.merge = opt.params.merge;
  cfg.detection = opt.params.detection;
  cfg.controller = opt.params.controller;
  cfg.event_log = &events;
  teleop::Session session(cfg);

  auto offsets = stage.open("offsets.csv");
  auto poses = stage.open("pose.csv");
  offsets << "frame,mode,dx,dy,gt_dx,gt_dy\n";
  write_pose_header(poses);
  std::vector<double> xs, dxs, dys;
  std::optional<std::int64_t> lost_at;
  RunReport rep;

  auto record = [&](const teleop::Outbox& out) {
    const std::int64_t n = session.frame() - 1;
    offsets << n << ',' << teleop::mode_name(session.mode()) << ',';
    if (session.last_offset()) {
      offsets << session.last_offset()->dx << ',' << session.last_offset()->dy;
      xs.push_back(static_cast<double>(n));
      dxs.push_back(session.last_offset()->dx);
      dys.push_back(session.last_offset()->dy);
    } else {
      offsets << ',';
    }
    offsets << ',';
    const auto* t = session.last_truth()->find(opt.target_id);
    if (t && t->visible) {
      const PixelOffset g = offset_of(t->box, opt.scene.width, opt.scene.height);
      offsets << g.dx << ',' << g.dy;
    } else {
      offsets << ',';
    }
    offsets << '\n';
    write_pose_row(poses, session.gait(), session.pose());
    for (const auto& m : out.broadcast) {
      if (m["kind"] == "ERROR" && !lost_at) lost_at = n;
    }
  };

  auto t0 = detail::Clock::now();
  record(session.tick());
  rep.detect_ms += detail::ms_since(t0);
  const auto* first = session.last_truth()->find(opt.target_id);
  if (!first || !first->visible) throw Error(Errc::invalid_parameter, "target is not visible in the first frame");
  teleop::OperatorMessage select;
  select.kind = teleop::OperatorKind::select_target;
  select.box = first->box;
  const auto reply = session.handle(select);
  if (!reply.reply.empty()) throw Error(Errc::invalid_parameter, "cannot select target: " + reply.reply.front().dump());

  for (std::size_t i = 1; i < opt.frames; ++i) {
    const bool tracking = session.mode() == teleop::Mode::tracking;
    t0 = detail::Clock::now();
    const auto out = session.tick();
    (tracking ? rep.track_ms : rep.detect_ms) += detail::ms_since(t0);
    record(out);
  }

  auto rcp = stage.open("rcp.csv");
  rcp << "frame,origin,bytes,turn,gimbal,dx,dy\n";
  for (const auto& e : session.rcp_log()) {
    rcp << e.frame << ',' << teleop::origin_name(e.origin) << ',' << teleop::hex_bytes(e.bytes) << ','
        << e.decoded.turn_flag << ',' << e.decoded.gimbal_flag << ',' << e.decoded.dx << ',' << e.decoded.dy << '\n';
  }
  for (auto* os : {&offsets, &poses, &rcp, &events}) {
    os->close();
    if (!*os) throw Error(Errc::io_error, "failed writing simulation output");
  }
  if (opt.plot) {
    const double th = session.controller_params().th;
    plot::ChartOptions co;
    co.hlines = {th, -th};
    io::write_png(stage.file("offsets.png"),
                  plot::line_chart({{xs, dxs, {200, 30, 30}}, {xs, dys, {30, 60, 200}}}, co));
  }
  rep.frames = static_cast<std::int64_t>(opt.frames);
  rep.details["rcp_frames"] = session.rcp_log().size();
  rep.details["lost_at"] = lost_at ? nlohmann::json(*lost_at) : nlohmann::json(nullptr);
  rep.outputs = stage.commit();
  rep.total_ms = detail::ms_since(t_start);
  return rep;
}

struct BenchEntry {
  std::string preset;
  double detect_fps = 0.0;
  double track_fps = 0.0;
};

struct BenchResult {
  RunReport report;
  std::vector<BenchEntry> entries;  // simple, complex
  bool detect_simple_faster = false;
  bool track_faster_than_detect = false;
  bool track_gap_smaller = false;

  bool ordering_holds() const { return detect_simple_faster && track_faster_than_detect && track_gap_smaller; }
};

/// Detection and tracking throughput on the simple and complex presets.
/// Rendering is excluded from both timings; fps comes from the median frame
/// time. The presets are timed frame by frame in alternation so that a slow
/// spell on the machine lands on both of them, and each tracking step is
/// timed a few times on copies of the state.
inline BenchResult run_bench(std::size_t n, unsigned jobs = 1, TunableParams params = {}) {
  if (n < 10) throw Error(Errc::invalid_parameter, "bench needs at least 10 frames");
  constexpr int kTrackRepeats = 3;
  const auto t_start = detail::Clock::now();
  BenchResult res;

  struct Lane {
    std::string name;
    std::vector<Frame> frames;
    scene::GroundTruth truth;
    std::optional<MotionDetector> det;
    std::optional<TrackState> ts;
    std::vector<double> detect_times, track_times;
  };
  std::vector<Lane> lanes;
  for (const char* name : {"simple", "complex"}) {
    Lane l;
    l.name = name;
    std::tie(l.frames, l.truth) = scene::generate_sequence(scene::preset(name), std::vector<BodyPose>(n + 1), n + 1, jobs);
    l.det.emplace(params.merge, params.detection);
    const auto* target = l.truth[0].find(1);
    if (!target || !target->visible) throw Error(Errc::invalid_parameter, "bench target missing in " + l.name);
    l.ts = init_track(l.frames[0], target->box);
    lanes.push_back(std::move(l));
  }

  for (std::size_t i = 1; i <= n; ++i) {
    for (auto& l : lanes) {
      const auto t0 = detail::Clock::now();
      l.det->detect_step(l.frames[i - 1], l.frames[i]);
      l.detect_times.push_back(detail::ms_since(t0));
    }
    for (auto& l : lanes) {
      for (int r = 0; r < kTrackRepeats; ++r) {
        TrackState trial = *l.ts;
        bool lost = false;
        const auto t0 = detail::Clock::now();
        try {
          update_track(trial, l.frames[i]);
        } catch (const Error& e) {
          if (e.code() != Errc::lost_target) throw;
          lost = true;
        }
        l.track_times.push_back(detail::ms_since(t0));
        if (r + 1 < kTrackRepeats) continue;
        if (!lost) {
          l.ts = std::move(trial);
        } else if (const auto* t = l.truth[i].find(1); t && t->visible) {
          l.ts = init_track(l.frames[i], t->box);
        }
      }
    }
  }

  for (const auto& l : lanes) {
    res.entries.push_back({l.name, 1000.0 / detail::median(l.detect_times), 1000.0 / detail::median(l.track_times)});
    res.report.detect_ms += std::accumulate(l.detect_times.begin(), l.detect_times.end(), 0.0);
    res.report.track_ms += std::accumulate(l.track_times.begin(), l.track_times.end(), 0.0) / kTrackRepeats;
    res.report.frames += static_cast<std::int64_t>(n);
  }
  const auto& s = res.entries[0];
  const auto& c = res.entries[1];
  res.detect_simple_faster = s.detect_fps > c.detect_fps;
  res.track_faster_than_detect = s.track_fps > s.detect_fps && c.track_fps > c.detect_fps;
  res.track_gap_smaller = std::fabs(s.track_fps - c.track_fps) < std::fabs(s.detect_fps - c.detect_fps);
  for (const auto& e : res.entries) {
    res.report.details["presets"].push_back({{"preset", e.preset}, {"detect_fps", e.detect_fps}, {"track_fps", e.track_fps}});
  }
  res.report.details["ordering"] = {{"detect_simple_faster", res.detect_simple_faster},
                                    {"track_faster_than_detect", res.track_faster_than_detect},
                                    {"track_gap_smaller", res.track_gap_smaller}};
  res.report.total_ms = detail::ms_since(t_start);
  return res;
}

}  // namespace hexatrack
