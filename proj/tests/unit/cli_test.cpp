#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hexatrack/scene_presets.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(HEXATRACK_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hexatrack_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path sub(const std::string& name) {
    fs::create_directories(dir_ / name);
    return dir_ / name;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpAndBadArguments) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_NE(run("detect"), 0);
  EXPECT_NE(run("frobnicate"), 0);
  EXPECT_NE(run("detect --preset nope --out " + dir_.string()), 0);
}

TEST_F(Cli, EmptySceneDetectWritesHeaderOnly) {
  const fs::path out = sub("empty");
  ASSERT_EQ(run("detect --preset empty --frames 4 --no-annotate --out " + out.string()), 0);
  EXPECT_EQ(slurp(out / "regions.csv"), "frame,region,x,y,w,h,area,cx,cy,mx,my\n");
  EXPECT_TRUE(fs::exists(out / "ground_truth.csv"));
  EXPECT_FALSE(fs::exists(out / "annotated"));
}

TEST_F(Cli, MissingOutputDirectoryFails) {
  const fs::path missing = dir_ / "does_not_exist";
  EXPECT_NE(run("detect --preset empty --frames 3 --out " + missing.string()), 0);
  EXPECT_FALSE(fs::exists(missing));
  EXPECT_NE(run("simulate --frames 3 --out " + missing.string()), 0);
  EXPECT_FALSE(fs::exists(missing));
}

TEST_F(Cli, DetectIsDeterministic) {
  const fs::path a = sub("a"), b = sub("b");
  ASSERT_EQ(run("detect --preset two_movers --frames 6 --out " + a.string()), 0);
  ASSERT_EQ(run("detect --preset two_movers --frames 6 --jobs 2 --out " + b.string()), 0);
  EXPECT_EQ(slurp(a / "regions.csv"), slurp(b / "regions.csv"));
  EXPECT_GT(csv_rows(a / "regions.csv").size(), 1u);
  EXPECT_TRUE(fs::exists(a / "annotated" / "frame_000005.png"));
  // No staging leftovers.
  for (const auto& e : fs::directory_iterator(a)) EXPECT_NE(e.path().filename().string().rfind(".staging", 0), 0u);
}

TEST_F(Cli, SimulateStationaryCentreTarget) {
  auto cfg = hexatrack::scene::empty_scene();
  cfg.texture_contrast = 0.7;
  hexatrack::scene::TargetSpec t;
  t.id = 1;
  t.parts = {{hexatrack::scene::PartShape::rect, {0, 0}, 40, 60, {40, 200, 235}, 25.0}};
  t.trajectory = {{0, 320, 240}};
  cfg.targets = {t};
  const fs::path scene_file = dir_ / "scene.json";
  std::ofstream(scene_file) << nlohmann::json(cfg).dump();

  const fs::path out = sub("sim");
  ASSERT_EQ(run("simulate --scene " + scene_file.string() + " --frames 40 --no-plot --out " + out.string()), 0);
  const auto offsets = csv_rows(out / "offsets.csv");
  ASSERT_EQ(offsets.size(), 41u);
  EXPECT_EQ(offsets[0], (std::vector<std::string>{"frame", "mode", "dx", "dy", "gt_dx", "gt_dy"}));
  for (std::size_t i = 2; i < offsets.size(); ++i) {
    ASSERT_EQ(offsets[i].size(), 6u);
    EXPECT_EQ(offsets[i][1], "tracking");
    EXPECT_NEAR(std::stod(offsets[i][2]), 0.0, 3.0);
    EXPECT_NEAR(std::stod(offsets[i][3]), 0.0, 3.0);
  }
  const auto rcp = csv_rows(out / "rcp.csv");
  ASSERT_GT(rcp.size(), 1u);
  for (std::size_t i = 1; i < rcp.size(); ++i) {
    EXPECT_EQ(rcp[i][1], "controller");
    EXPECT_EQ(rcp[i][3], "0");
    EXPECT_EQ(rcp[i][4], "0");
  }
  EXPECT_TRUE(fs::exists(out / "pose.csv"));
  EXPECT_TRUE(fs::exists(out / "events.jsonl"));
  EXPECT_FALSE(fs::exists(out / "offsets.png"));
}

TEST_F(Cli, RenderKeypointsAndDetectFromFiles) {
  const fs::path frames = sub("frames");
  ASSERT_EQ(run("render --preset simple --frames 3 --format ppm --out " + frames.string()), 0);
  EXPECT_TRUE(fs::exists(frames / "frame_000002.ppm"));
  EXPECT_EQ(csv_rows(frames / "ground_truth.csv").size() > 1, true);

  const fs::path kp = dir_ / "kp.csv";
  ASSERT_EQ(run("keypoints --input " + (frames / "frame_000000.ppm").string() + " --max 50 --out " + kp.string()), 0);
  const auto rows = csv_rows(kp);
  ASSERT_GT(rows.size(), 10u);
  EXPECT_LE(rows.size(), 51u);

  const fs::path det = sub("det");
  ASSERT_EQ(run("detect --input " + frames.string() + " --no-annotate --out " + det.string()), 0);
  EXPECT_TRUE(fs::exists(det / "regions.csv"));
  EXPECT_FALSE(fs::exists(det / "ground_truth.csv"));
}

TEST_F(Cli, ParamsFile) {
  const fs::path p = dir_ / "params.json";
  std::ofstream(p) << R"({"th1": 10, "min_area": 5})";
  const fs::path out = sub("p");
  EXPECT_EQ(run("detect --preset empty --frames 2 --no-annotate --params " + p.string() + " --out " + out.string()), 0);
  std::ofstream(p) << R"({"th1": -10})";
  EXPECT_NE(run("detect --preset empty --frames 2 --no-annotate --params " + p.string() + " --out " + out.string()), 0);
}
