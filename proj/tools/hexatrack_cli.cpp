// hexatrack command line: detect, simulate, bench, serve, render, keypoints.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "hexatrack/hexatrack.hpp"

namespace fs = std::filesystem;
using namespace hexatrack;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct SceneArgs {
  std::string scene_file;
  std::string preset;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app, const std::string& default_preset) {
    preset = default_preset;
    auto* f = app->add_option("--scene", scene_file, "scene config JSON file")->check(CLI::ExistingFile);
    app->add_option("--preset", preset, "named scene preset")
        ->check(CLI::IsMember(scene::preset_names()))
        ->excludes(f)
        ->capture_default_str();
    app->add_option("--seed", seed, "override the scene's jitter/texture seed");
  }

  scene::SceneConfig load() const {
    scene::SceneConfig cfg;
    if (!scene_file.empty()) {
      std::ifstream in(scene_file);
      const auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) throw Error(Errc::invalid_parameter, "scene file is not valid JSON: " + scene_file);
      cfg = j.get<scene::SceneConfig>();
    } else {
      cfg = scene::preset(preset);
    }
    if (seed) cfg.rng_seed = *seed;
    scene::validate(cfg);
    return cfg;
  }
};

TunableParams load_params(const std::string& path) { return path.empty() ? TunableParams{} : load_params_file(path); }

void print_report(const RunReport& r) { std::cout << nlohmann::json(r).dump(2) << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hexatrack: moving-camera detection, KCF tracking and a simulated hexapod"};
  app.require_subcommand(1);

  // detect
  auto* detect = app.add_subcommand("detect", "run motion detection over a rendered scene or a frame directory");
  SceneArgs detect_scene;
  detect_scene.add(detect, "two_movers");
  std::string detect_input, detect_out, detect_params;
  std::size_t detect_frames = 50;
  unsigned detect_jobs = 1;
  bool no_annotate = false;
  detect->add_option("--input", detect_input, "directory of .png/.ppm frames instead of a scene");
  detect->add_option("--frames", detect_frames, "frames to process")->capture_default_str();
  detect->add_option("--out", detect_out, "output directory (must exist)")->required();
  detect->add_option("--params", detect_params, "tunable parameters JSON")->check(CLI::ExistingFile);
  detect->add_option("--jobs", detect_jobs, "render threads")->check(CLI::Range(1u, 64u))->capture_default_str();
  detect->add_flag("--no-annotate", no_annotate, "skip annotated frame images");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "closed-loop tracking run; writes offset and pose traces");
  SceneArgs sim_scene;
  sim_scene.add(simulate, "offset_trace");
  std::string sim_out, sim_params;
  std::size_t sim_frames = 340;
  int sim_target = 1;
  bool no_plot = false;
  simulate->add_option("--target", sim_target, "target id to select in the first frame")->capture_default_str();
  simulate->add_option("--frames", sim_frames, "ticks to run")->capture_default_str();
  simulate->add_option("--out", sim_out, "output directory (must exist)")->required();
  simulate->add_option("--params", sim_params, "tunable parameters JSON")->check(CLI::ExistingFile);
  simulate->add_flag("--no-plot", no_plot, "skip offsets.png");

  // bench
  auto* bench = app.add_subcommand("bench", "detection and tracking frame rates on the simple and complex presets");
  std::size_t bench_frames = 30;
  unsigned bench_jobs = 1;
  std::string bench_out, bench_params;
  bench->add_option("--frames", bench_frames, "frames per preset (>= 10)")->capture_default_str();
  bench->add_option("--jobs", bench_jobs, "render threads")->check(CLI::Range(1u, 64u))->capture_default_str();
  bench->add_option("--out", bench_out, "also write bench.json into this directory");
  bench->add_option("--params", bench_params, "tunable parameters JSON")->check(CLI::ExistingFile);

  // serve
  auto* serve = app.add_subcommand("serve", "run the teleoperation service (/ws, GET /status)");
  SceneArgs serve_scene;
  serve_scene.add(serve, "two_movers");
  std::string address = "127.0.0.1", image_mode = "png", image_dir, event_log, serve_params;
  unsigned short port = 8080;
  double rate = 10.0, duration = 0.0;
  serve->add_option("--address", address, "bind address")->capture_default_str();
  serve->add_option("--port", port, "TCP port, 0 for any free port")->capture_default_str();
  serve->add_option("--rate", rate, "ticks per second")->check(CLI::PositiveNumber)->capture_default_str();
  serve->add_option("--image", image_mode, "FRAME image transport")
      ->check(CLI::IsMember({"none", "png", "file"}))
      ->capture_default_str();
  serve->add_option("--image-dir", image_dir, "directory for --image file");
  serve->add_option("--event-log", event_log, "session event log (JSON lines)");
  serve->add_option("--params", serve_params, "tunable parameters JSON")->check(CLI::ExistingFile);
  serve->add_option("--duration", duration, "stop after this many seconds, 0 runs until interrupted");

  // render
  auto* render = app.add_subcommand("render", "render scene frames and ground truth");
  SceneArgs render_scene;
  render_scene.add(render, "two_movers");
  std::string render_out, render_format = "png";
  std::size_t render_frames = 10;
  unsigned render_jobs = 1;
  render->add_option("--frames", render_frames, "frames to render")->capture_default_str();
  render->add_option("--out", render_out, "output directory (must exist)")->required();
  render->add_option("--format", render_format, "image format")->check(CLI::IsMember({"png", "ppm"}))->capture_default_str();
  render->add_option("--jobs", render_jobs, "render threads")->check(CLI::Range(1u, 64u))->capture_default_str();

  // keypoints
  auto* keypoints = app.add_subcommand("keypoints", "detect interest points in one image");
  std::string kp_input, kp_out;
  std::size_t kp_max = 400;
  keypoints->add_option("--input", kp_input, "image (.png or .ppm)")->required()->check(CLI::ExistingFile);
  keypoints->add_option("--max", kp_max, "maximum keypoints")->capture_default_str();
  keypoints->add_option("--out", kp_out, "CSV path, stdout when omitted");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*detect) {
      DetectOptions opt;
      if (detect_input.empty()) opt.scene = detect_scene.load();
      else opt.input_dir = detect_input;
      opt.frames = detect_frames;
      opt.jobs = detect_jobs;
      opt.annotate = !no_annotate;
      opt.params = load_params(detect_params);
      print_report(run_detect(opt, detect_out));
    } else if (*simulate) {
      SimulateOptions opt;
      opt.scene = sim_scene.load();
      opt.target_id = sim_target;
      opt.frames = sim_frames;
      opt.params = load_params(sim_params);
      opt.plot = !no_plot;
      print_report(run_simulate(opt, sim_out));
    } else if (*bench) {
      const BenchResult r = run_bench(bench_frames, bench_jobs, load_params(bench_params));
      for (const auto& e : r.entries) {
        std::printf("%-8s detect %7.2f fps   track %7.2f fps\n", e.preset.c_str(), e.detect_fps, e.track_fps);
      }
      std::printf("ordering: detect simple > complex %s, track > detect %s, track gap < detect gap %s\n",
                  r.detect_simple_faster ? "yes" : "NO", r.track_faster_than_detect ? "yes" : "NO",
                  r.track_gap_smaller ? "yes" : "NO");
      if (!bench_out.empty()) {
        if (!fs::is_directory(bench_out)) throw Error(Errc::io_error, "output directory does not exist: " + bench_out);
        std::ofstream(fs::path(bench_out) / "bench.json") << nlohmann::json(r.report).dump(2) << '\n';
      }
      if (!r.track_faster_than_detect) {
        std::fprintf(stderr, "tracking was not faster than detection\n");
        return 2;
      }
    } else if (*serve) {
      teleop::SessionConfig cfg;
      cfg.world = serve_scene.load();
      const TunableParams p = load_params(serve_params);
      cfg.merge = p.merge;
      cfg.detection = p.detection;
      cfg.controller = p.controller;
      cfg.image = image_mode == "png" ? teleop::ImageMode::png
                  : image_mode == "file" ? teleop::ImageMode::file
                                         : teleop::ImageMode::none;
      if (cfg.image == teleop::ImageMode::file) {
        if (image_dir.empty() || !fs::is_directory(image_dir)) {
          throw Error(Errc::io_error, "--image file needs an existing --image-dir");
        }
        cfg.image_dir = image_dir;
      }
      std::ofstream log;
      if (!event_log.empty()) {
        log.open(event_log);
        if (!log) throw Error(Errc::io_error, "cannot open event log: " + event_log);
        cfg.event_log = &log;
      }
      teleop::ServerOptions so;
      so.address = address;
      so.port = port;
      so.ticks_per_second = rate;
      teleop::Server server(std::move(cfg), so);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.start();
      std::cout << "listening on " << address << ':' << server.port() << std::endl;
      const auto t0 = std::chrono::steady_clock::now();
      while (!g_interrupted) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        if (duration > 0.0 && std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >= duration) break;
      }
      server.stop();
      std::cout << server.snapshot() << std::endl;
    } else if (*render) {
      const auto cfg = render_scene.load();
      if (render_frames < 1) throw Error(Errc::invalid_parameter, "--frames must be >= 1");
      detail::Staging stage(render_out);
      auto [frames, truth] = scene::generate_sequence(cfg, std::vector<BodyPose>(render_frames), render_frames, render_jobs);
      for (const auto& f : frames) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%06lld.%s", static_cast<long long>(f.index()), render_format.c_str());
        if (render_format == "png") io::write_png(stage.file(name), f);
        else io::write_ppm(stage.file(name), f);
      }
      auto gt = stage.open("ground_truth.csv");
      scene::write_ground_truth_csv(gt, truth);
      gt.close();
      RunReport r;
      r.frames = static_cast<std::int64_t>(frames.size());
      r.outputs = stage.commit();
      print_report(r);
    } else if (*keypoints) {
      const Frame f = io::read_frame(kp_input);
      const auto feats = detect_and_describe(to_grayscale(f), kp_max);
      if (kp_out.empty()) {
        write_keypoints_csv(std::cout, feats);
      } else {
        std::ofstream os(kp_out);
        if (!os) throw Error(Errc::io_error, "cannot write " + kp_out);
        write_keypoints_csv(os, feats);
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
