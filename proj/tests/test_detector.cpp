#include <gtest/gtest.h>

#include <filesystem>

#include "tiledet/detector.hpp"
#include "tiledet/error.hpp"

using namespace tiledet;

TEST(Letterbox, IdentityAtTarget) {
  const auto t = letterbox_transform(640, 640, 640);
  EXPECT_DOUBLE_EQ(t.scale, 1.0);
  EXPECT_DOUBLE_EQ(t.pad_x, 0.0);
  EXPECT_DOUBLE_EQ(t.pad_y, 0.0);
}

TEST(Letterbox, WideImage) {
  Image img(1280, 640, {10, 20, 30});
  const auto lb = letterbox(img, 640);
  EXPECT_DOUBLE_EQ(lb.transform.scale, 0.5);
  EXPECT_DOUBLE_EQ(lb.transform.pad_y, 160.0);
  ASSERT_EQ(lb.raster.width(), 640);
  ASSERT_EQ(lb.raster.height(), 640);
  EXPECT_EQ(lb.raster.at(320, 100), kLetterboxPad);
  EXPECT_EQ(lb.raster.at(320, 320), (Rgb{10, 20, 30}));
  EXPECT_EQ(lb.raster.at(320, 540), kLetterboxPad);
}

TEST(Letterbox, ForwardInverseRoundTrip) {
  const auto t = letterbox_transform(1000, 300, 640);
  const BBox b{12.5, 40, 100, 33};
  const BBox r = t.inverse(t.forward(b));
  EXPECT_NEAR(r.x, b.x, 1e-9);
  EXPECT_NEAR(r.y, b.y, 1e-9);
  EXPECT_NEAR(r.w, b.w, 1e-9);
  EXPECT_NEAR(r.h, b.h, 1e-9);
}

TEST(OracleProbability, ResolutionAsymmetry) {
  const OracleParams p;
  EXPECT_NEAR(oracle_detection_probability({0, 0, 20, 20}, 1920, 1920, p), 400.0 / 9.0 / 1024.0, 1e-12);
  EXPECT_NEAR(oracle_detection_probability({0, 0, 20, 20}, 640, 640, p), 400.0 / 1024.0, 1e-12);
  EXPECT_DOUBLE_EQ(oracle_detection_probability({0, 0, 40, 40}, 640, 640, p), 1.0);
}

TEST(OracleDetect, NoiseFreeEqualsGroundTruth) {
  OracleParams p;
  p.jitter = 0;
  p.fp_rate = 0;
  p.score_noise = 0;
  std::vector<GroundTruthBox> gts{{{10, 10, 40, 40}, 1, "a"}, {{100, 200, 64, 32}, 2, "a"}};
  const auto out = oracle_detect(640, 640, gts, p, 9);
  ASSERT_EQ(out.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(out[i].bbox, gts[i].bbox);
    EXPECT_EQ(out[i].class_id, gts[i].class_id);
    EXPECT_DOUBLE_EQ(out[i].score, 1.0);
  }
}

TEST(OracleDetect, DeterministicAndInView) {
  const OracleParams p;
  std::vector<GroundTruthBox> gts;
  for (int i = 0; i < 20; ++i) gts.push_back({{i * 30.0, i * 25.0, 20, 25}, i % 3, "a"});
  const auto a = oracle_detect(600, 500, gts, p, 77);
  EXPECT_EQ(a, oracle_detect(600, 500, gts, p, 77));
  for (const auto& d : a) {
    EXPECT_GE(d.bbox.x, 0);
    EXPECT_GE(d.bbox.y, 0);
    EXPECT_LE(d.bbox.right(), 600 + 1e-9);
    EXPECT_LE(d.bbox.bottom(), 500 + 1e-9);
    EXPECT_GT(d.bbox.area(), 0);
    EXPECT_GE(d.class_id, 0);
    EXPECT_LT(d.class_id, 3);
  }
}

TEST(OracleDetect, DetectionRateFollowsProbability) {
  OracleParams p;
  p.fp_rate = 0;
  std::vector<GroundTruthBox> gts{{{0, 0, 16, 16}, 0, "a"}};  // p = 256/1024 at 640
  int hits = 0;
  for (int s = 0; s < 4000; ++s) hits += static_cast<int>(oracle_detect(640, 640, gts, p, s).size());
  EXPECT_NEAR(hits / 4000.0, 0.25, 0.03);
}

TEST(OracleDetector, TileViewSeesOnlyVisibleObjects) {
  OracleParams p;
  p.jitter = 0;
  p.fp_rate = 0;
  p.score_noise = 0;
  std::vector<GroundTruthBox> gts{{{110, 110, 40, 40}, 0, "img"}, {{500, 500, 40, 40}, 1, "img"}};
  OracleDetector det(gts, p);
  const Tile tile{0, 0, 100, 100, 200, 200};
  const auto out = det.detect({}, ViewMeta::of_tile("img", tile, 640), 3);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].bbox, (BBox{10, 10, 40, 40}));
  EXPECT_TRUE(det.detect({}, ViewMeta::full("unknown", 600, 600), 3).empty());
}

TEST(ViewMeta, Keys) {
  EXPECT_EQ(ViewMeta::full("a", 10, 10).key(), "full");
  EXPECT_EQ(ViewMeta::of_tile("a", {3, 1, 0, 0, 5, 5}).key(), "tile_3_1");
}

TEST(Replay, StoredAndMissing) {
  ReplayStore store;
  store.entries["a"]["full"] = {{{1, 2, 3, 4}, 1, 0.5}};
  ReplayDetector det(store);
  EXPECT_EQ(det.detect({}, ViewMeta::full("a", 10, 10), 0), store.entries["a"]["full"]);
  try {
    det.detect({}, ViewMeta::of_tile("a", {0, 0, 0, 0, 5, 5}), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNotFound);
  }
}

TEST(Replay, FileRoundTrip) {
  ReplayStore store;
  OracleParams p;
  std::vector<GroundTruthBox> gts{{{10, 10, 30, 30}, 0, "x"}, {{200, 100, 12, 50}, 2, "x"}};
  for (int i = 0; i < 5; ++i) {
    const std::string id = "img" + std::to_string(i);
    store.entries[id]["full"] = oracle_detect(640, 480, gts, p, i);
    store.entries[id]["tile_0_0"] = oracle_detect(320, 240, gts, p, 100 + i);
  }
  const auto path = std::filesystem::temp_directory_path() / "tiledet_replay_rt.json";
  save_replay_store(store, path);
  EXPECT_EQ(load_replay_store(path), store);
  std::filesystem::remove(path);
  EXPECT_THROW(replay_store_from_string("{\"format\": 3}"), Error);
}
