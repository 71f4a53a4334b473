#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli_runner.hpp"
#include "tiledet/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "tiledet_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const auto r = run_cli("synth gen --out " + (dir_ / "data").string() +
                           " --count 6 --width 640 --height 480 --seed 3");
    ASSERT_EQ(r.status, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& rel) { return (dir_ / rel).string(); }
  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, TilesPlan) {
  const auto r = run_cli("tiles plan --width 600 --height 600 --grid 5x5 --overlap 0.5");
  ASSERT_EQ(r.status, 0);
  std::istringstream in(r.out);
  std::string header;
  std::getline(in, header);
  int n = 0, col, row, x, y, w, h;
  while (in >> col >> row >> x >> y >> w >> h) {
    EXPECT_EQ(x, col * 100);
    EXPECT_EQ(y, row * 100);
    EXPECT_EQ(w, 200);
    EXPECT_EQ(h, 200);
    ++n;
  }
  EXPECT_EQ(n, 25);
}

TEST_F(Cli, ValidationErrorsExitOne) {
  EXPECT_EQ(run_cli("detect run --out " + path("x.json")).status, 1);
  EXPECT_EQ(run_cli("tiles plan --width 600 --height 600 --grid 5by5").status, 1);
  EXPECT_EQ(run_cli("tiles plan --width 600 --height 600 --overlap 1.5").status, 1);
  EXPECT_EQ(run_cli("eval map --gt /nonexistent.json --pred /nonexistent.json").status, 1);
  EXPECT_EQ(run_cli("frobnicate").status, 1);
  EXPECT_EQ(run_cli("--help").status, 0);
}

TEST_F(Cli, RuntimeErrorsExitTwo) {
  std::ofstream(path("garbage.json")) << "{ nope";
  EXPECT_EQ(run_cli("eval map --gt " + path("garbage.json") + " --pred " + path("garbage.json")).status, 2);
}

TEST_F(Cli, HelpListsDefaults) {
  const auto r = run_cli("bench compare --help");
  EXPECT_NE(r.out.find("--area-ref"), std::string::npos);
  EXPECT_NE(r.out.find("1024"), std::string::npos);
  EXPECT_NE(r.out.find("0.45"), std::string::npos);
}

TEST_F(Cli, BenchCompareDeterministic) {
  const std::string base = "bench compare --manifest " + path("data/manifest.json") + " --seed 7 --out ";
  ASSERT_EQ(run_cli(base + path("b1.json")).status, 0);
  ASSERT_EQ(run_cli(base + path("b2.json") + " --threads 3").status, 0);
  EXPECT_EQ(slurp(path("b1.json")), slurp(path("b2.json")));
  const json run = json::parse(slurp(path("b1.json.run.json")));
  EXPECT_EQ(run["command"], "bench compare");
  EXPECT_EQ(run["seed"], 7);
  EXPECT_TRUE(run.contains("timing"));
  EXPECT_NE(run["config"].get<std::string>().find("area-ref"), std::string::npos);
}

TEST_F(Cli, ConfigFileAndFlagOverride) {
  std::ofstream(path("cfg.toml")) << "[tiles.plan]\nwidth=600\nheight=600\ngrid=\"2x2\"\noverlap=0.0\n";
  const auto a = run_cli("--config " + path("cfg.toml") + " tiles plan");
  ASSERT_EQ(a.status, 0);
  EXPECT_NE(a.out.find("1 1 300 300 300 300"), std::string::npos) << a.out;
  const auto b = run_cli("--config " + path("cfg.toml") + " tiles plan --width 800");
  EXPECT_NE(b.out.find("1 1 400 300 400 300"), std::string::npos) << b.out;
}

TEST_F(Cli, DetectEvalRoundTrip) {
  const std::string img = path("data/images/synth_00000.png");
  ASSERT_EQ(run_cli("detect run --image " + img + " --gt " + path("data/manifest.json") + " --seed 4 --out " +
                    path("d1.json"))
                .status,
            0);
  const json doc = json::parse(slurp(path("d1.json")));
  EXPECT_EQ(doc["image_id"], "synth_00000");
  EXPECT_EQ(doc["width"], 640);
  EXPECT_TRUE(doc["detections"].is_array());

  ASSERT_EQ(run_cli("detect run --manifest " + path("data/manifest.json") + " --seed 4 --out " + path("batch.json"))
                .status,
            0);
  const json batch = json::parse(slurp(path("batch.json")));
  ASSERT_EQ(batch["images"].size(), 6u);
  EXPECT_EQ(batch["images"][0]["detections"], doc["detections"]);

  const auto r = run_cli("eval map --gt " + path("data/manifest.json") + " --pred " + path("batch.json") +
                         " --name tiled --out " + path("eval.json"));
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("tiled"), std::string::npos);
  EXPECT_NE(r.out.find("0.5:0.95"), std::string::npos);
  EXPECT_TRUE(json::parse(slurp(path("eval.json")))["all"].contains("map50"));
}

TEST_F(Cli, DatasetCommands) {
  ASSERT_EQ(run_cli("dataset split --manifest " + path("data/manifest.json") + " --out-dir " + path("split") +
                    " --seed 1")
                .status,
            0);
  const json train = json::parse(slurp(path("split/train.json")));
  EXPECT_EQ(train["images"].size(), 3u);
  EXPECT_EQ(run_cli("dataset split --manifest " + path("data/manifest.json") + " --out-dir " + path("split") +
                    " --ratios 0.5,0.5,0.5")
                .status,
            1);

  ASSERT_EQ(run_cli("dataset convert --to coco --images-dir " + path("data/images") + " --labels-dir " +
                    path("data/labels") + " --out " + path("conv.json"))
                .status,
            0);
  const json conv = json::parse(slurp(path("conv.json")));
  const json orig = json::parse(slurp(path("data/manifest.json")));
  ASSERT_EQ(conv["annotations"].size(), orig["annotations"].size());
  for (std::size_t i = 0; i < orig["annotations"].size(); ++i)
    for (int k = 0; k < 4; ++k)
      EXPECT_NEAR(conv["annotations"][i]["bbox"][k].get<double>(), orig["annotations"][i]["bbox"][k].get<double>(), 1.0);

  ASSERT_EQ(run_cli("dataset extend --manifest " + path("data/manifest.json") + " --out-dir " + path("ext") +
                    " --grid 2x2 --overlap 0")
                .status,
            0);
  const json ext = json::parse(slurp(path("ext/manifest.json")));
  EXPECT_EQ(ext["images"].size(), 6u * 5u);
}

TEST_F(Cli, FilterCommandsDeterministic) {
  const std::string build = "filter build-dataset --manifest " + path("data/manifest.json") +
                            " --grid 8x8 --overlap 0 --holdout 0.34 --seed 2 --out ";
  ASSERT_EQ(run_cli(build + path("s1.json")).status, 0);
  ASSERT_EQ(run_cli(build + path("s2.json")).status, 0);
  EXPECT_EQ(slurp(path("s1.json")), slurp(path("s2.json")));
  const std::string train = "filter train --samples " + path("s1.json") + " --epochs 20 --seed 3 --out ";
  ASSERT_EQ(run_cli(train + path("m1.json")).status, 0);
  ASSERT_EQ(run_cli(train + path("m2.json")).status, 0);
  EXPECT_EQ(slurp(path("m1.json")), slurp(path("m2.json")));
  const auto ev = run_cli("filter eval --model " + path("m1.json") + " --samples " + path("s1.json"));
  ASSERT_EQ(ev.status, 0);
  EXPECT_NE(ev.out.find("accuracy"), std::string::npos);
  ASSERT_EQ(run_cli("detect run --image " + path("data/images/synth_00001.png") + " --filter " + path("m1.json") +
                    " --out " + path("df.json"))
                .status,
            0);
  EXPECT_EQ(json::parse(slurp(path("df.json")))["config"]["filter"]["dimension"], 96);
}
