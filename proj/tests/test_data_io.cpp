#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "support/oracles.hpp"
#include "tiledet/data_io.hpp"
#include "tiledet/error.hpp"
#include "tiledet/image.hpp"

using namespace tiledet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tiledet_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DatasetManifest small_manifest(int images, int per_image, std::uint64_t seed) {
  oracle::Gen g(seed);
  DatasetManifest m = make_manifest({"a", "b", "c"});
  std::int64_t ann = 1;
  for (int i = 0; i < images; ++i) {
    ImageRecord r{"img" + std::to_string(i), "img" + std::to_string(i) + ".png", g.integer(100, 900),
                  g.integer(100, 900), std::nullopt};
    for (int k = 0; k < per_image; ++k) {
      const double w = g.real(1, r.width / 2.0);
      const double h = g.real(1, r.height / 2.0);
      m.annotations.push_back({ann++, {{g.real(0, r.width - w), g.real(0, r.height - h), w, h}, g.integer(0, 2), r.id}});
    }
    m.images.push_back(r);
  }
  return m;
}

}  // namespace

TEST(Yolo, FullImageBox) {
  const auto gts = parse_yolo_labels("0 0.5 0.5 1.0 1.0\n", 600, 600, "x");
  ASSERT_EQ(gts.size(), 1u);
  EXPECT_EQ(gts[0].bbox, (BBox{0, 0, 600, 600}));
  EXPECT_EQ(gts[0].class_id, 0);
  EXPECT_EQ(gts[0].image_id, "x");
}

TEST(Yolo, EmitExample) {
  const std::vector<GroundTruthBox> gts{{{110, 120, 30, 40}, 1, "x"}};
  EXPECT_EQ(emit_yolo_labels(gts, 600, 400), "1 0.208333 0.350000 0.050000 0.100000\n");
}

TEST(Yolo, MalformedLineNamed) {
  try {
    parse_yolo_labels("0 0.5 0.5 0.1 0.1\n1 0.5 oops 0.1 0.1\n", 100, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Yolo, OutOfRange) {
  try {
    parse_yolo_labels("0 1.5 0.5 0.1 0.1\n", 100, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kOutOfBounds);
  }
}

TEST(Yolo, BlankLinesIgnored) { EXPECT_EQ(parse_yolo_labels("\n  \n0 0.5 0.5 0.2 0.2\n\n", 10, 10).size(), 1u); }

TEST(Yolo, ParseEmitFixpoint) {
  oracle::Gen g(41);
  for (int i = 0; i < 300; ++i) {
    const int w = g.integer(50, 4000);
    const int h = g.integer(50, 4000);
    std::string text;
    for (int k = g.integer(1, 6); k > 0; --k) {
      char line[96];
      const double bw = g.integer(1, 1000000) / 1e6;
      const double bh = g.integer(1, 1000000) / 1e6;
      const double cx = (g.integer(0, 1000000) / 1e6) * (1 - bw) + bw / 2;
      const double cy = (g.integer(0, 1000000) / 1e6) * (1 - bh) + bh / 2;
      std::snprintf(line, sizeof line, "%d %.6f %.6f %.6f %.6f\n", g.integer(0, 2), cx, cy, bw, bh);
      text += line;
    }
    const std::string once = emit_yolo_labels(parse_yolo_labels(text, w, h), w, h);
    const auto a = parse_yolo_labels(text, w, h);
    const auto b = parse_yolo_labels(once, w, h);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_NEAR((a[k].bbox.x - b[k].bbox.x) / w, 0.0, 1e-6);
      EXPECT_NEAR((a[k].bbox.w - b[k].bbox.w) / w, 0.0, 1e-6);
      EXPECT_NEAR((a[k].bbox.y - b[k].bbox.y) / h, 0.0, 1e-6);
      EXPECT_NEAR((a[k].bbox.h - b[k].bbox.h) / h, 0.0, 1e-6);
    }
    EXPECT_EQ(emit_yolo_labels(b, w, h), once);
  }
}

TEST(Coco, MinimalDocument) {
  const auto m = coco_from_string(R"({"categories":[{"id":7,"name":"caries"}],
    "images":[{"id":1,"file_name":"a.png","width":64,"height":48}],
    "annotations":[{"id":3,"image_id":1,"category_id":7,"bbox":[1,2,3,4]}]})");
  const auto gts = m.ground_truth();
  ASSERT_EQ(gts.size(), 1u);
  EXPECT_EQ(gts[0].bbox, (BBox{1, 2, 3, 4}));
  EXPECT_EQ(gts[0].class_id, 0);
  EXPECT_EQ(gts[0].image_id, "1");
  EXPECT_EQ(m.category_ids[0], 7);
}

TEST(Coco, ExactRoundTrip) {
  auto m = small_manifest(20, 5, 42);
  m.images[3].provenance = TileProvenance{"img0", 2, 1};
  EXPECT_EQ(coco_from_string(coco_to_string(m)), m);
  EXPECT_EQ(coco_to_string(coco_from_string(coco_to_string(m))), coco_to_string(m));
}

TEST(Coco, DanglingReferenceRejected) {
  EXPECT_THROW(coco_from_string(R"({"categories":[{"id":1,"name":"a"}],"images":[],
    "annotations":[{"id":1,"image_id":9,"category_id":1,"bbox":[0,0,1,1]}]})"),
               Error);
  EXPECT_THROW(coco_from_string("{not json"), Error);
}

TEST(Convert, CocoYoloCocoWithinOnePixel) {
  const fs::path dir = scratch("convert");
  const auto m = small_manifest(8, 10, 43);
  for (const auto& r : m.images) write_png(Image(r.width, r.height), dir / "images" / r.file_name);
  write_yolo_dir(m, dir / "labels");
  const auto back = read_yolo_dir(dir / "images", dir / "labels", m.categories);
  ASSERT_EQ(back.images.size(), m.images.size());
  ASSERT_EQ(back.annotations.size(), m.annotations.size());
  for (std::size_t i = 0; i < m.annotations.size(); ++i) {
    const auto& a = m.annotations[i].box;
    const auto& b = back.annotations[i].box;
    EXPECT_EQ(a.class_id, b.class_id);
    EXPECT_NEAR(a.bbox.x, b.bbox.x, 1.0);
    EXPECT_NEAR(a.bbox.y, b.bbox.y, 1.0);
    EXPECT_NEAR(a.bbox.w, b.bbox.w, 1.0);
    EXPECT_NEAR(a.bbox.h, b.bbox.h, 1.0);
  }
  fs::remove_all(dir);
}

TEST(Split, SixTwoTwo) {
  const auto parts = split(small_manifest(10, 2, 1), {0.6, 0.2, 0.2, 5});
  EXPECT_EQ(parts.train.images.size(), 6u);
  EXPECT_EQ(parts.val.images.size(), 2u);
  EXPECT_EQ(parts.test.images.size(), 2u);
  EXPECT_EQ(parts.train.annotations.size(), 12u);
}

TEST(Split, RemainderToTest) {
  const auto parts = split(small_manifest(7, 1, 1), {0.6, 0.2, 0.2, 5});
  EXPECT_EQ(parts.train.images.size(), 4u);
  EXPECT_EQ(parts.val.images.size(), 1u);
  EXPECT_EQ(parts.test.images.size(), 2u);
}

TEST(Split, DeterministicAndDisjoint) {
  const auto m = small_manifest(30, 1, 2);
  const auto a = split(m, {0.6, 0.2, 0.2, 9});
  const auto b = split(m, {0.6, 0.2, 0.2, 9});
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::set<std::string> ids;
  for (const auto* part : {&a.train, &a.val, &a.test})
    for (const auto& r : part->images) EXPECT_TRUE(ids.insert(r.id).second);
  EXPECT_EQ(ids.size(), 30u);
}

TEST(Split, RatiosMustSumToOne) { EXPECT_THROW(split(small_manifest(3, 1, 1), {0.5, 0.2, 0.2, 0}), Error); }

TEST(Extend, OneImageTwentySixRecords) {
  const fs::path dir = scratch("extend");
  DatasetManifest m = make_manifest({"a"});
  m.images.push_back({"src", "src.png", 600, 600, std::nullopt});
  m.annotations.push_back({1, {{280, 280, 40, 40}, 0, "src"}});
  write_png(Image(600, 600, {50, 60, 70}), dir / "in" / "src.png");
  const auto res = materialize_extended(m, dir / "in", dir / "out", {5, 5, 0.5}, 0.5);
  EXPECT_TRUE(res.errors.empty());
  ASSERT_EQ(res.manifest.images.size(), 26u);
  for (const auto& r : res.manifest.images) EXPECT_TRUE(fs::exists(dir / "out" / r.file_name)) << r.file_name;
  // Object spans [280,320) on both axes; tiles are [o, o+200) for o in {0,100,...,400}.
  std::set<std::string> expected{"src"};
  const int origins[] = {0, 100, 200, 300, 400};
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      auto frac = [](int o) { return std::max(0, std::min(320, o + 200) - std::max(280, o)) / 40.0; };
      if (frac(origins[c]) * frac(origins[r]) >= 0.5)
        expected.insert("src_r" + std::to_string(r) + "_c" + std::to_string(c));
    }
  std::set<std::string> labelled;
  for (const auto& a : res.manifest.annotations) labelled.insert(a.box.image_id);
  EXPECT_EQ(labelled, expected);
  EXPECT_EQ(expected.size(), 6u);
  const Image tile = read_image(dir / "out" / res.manifest.find_image("src_r2_c2")->file_name);
  EXPECT_EQ(tile.width(), 200);
  EXPECT_EQ(tile.at(0, 0), (Rgb{50, 60, 70}));
  fs::remove_all(dir);
}

TEST(Extend, EmptyManifest) {
  const fs::path dir = scratch("extend_empty");
  const auto res = materialize_extended(make_manifest({"a"}), dir, dir / "out", {5, 5, 0.5}, 0.5);
  EXPECT_TRUE(res.manifest.images.empty());
  EXPECT_TRUE(res.errors.empty());
  fs::remove_all(dir);
}

TEST(Extend, MissingFileCollected) {
  const fs::path dir = scratch("extend_missing");
  DatasetManifest m = make_manifest({"a"});
  m.images.push_back({"gone", "gone.png", 100, 100, std::nullopt});
  const auto res = materialize_extended(m, dir, dir / "out", {2, 2, 0.0}, 0.5);
  EXPECT_EQ(res.errors.size(), 1u);
  fs::remove_all(dir);
}
