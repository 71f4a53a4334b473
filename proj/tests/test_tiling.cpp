#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "tiledet/error.hpp"
#include "tiledet/image.hpp"
#include "tiledet/tiling.hpp"

using namespace tiledet;

TEST(PlanTiles, FiveByFiveHalfOverlap) {
  const auto tiles = plan_tiles(600, 600, {5, 5, 0.5});
  ASSERT_EQ(tiles.size(), 25u);
  const int origins[] = {0, 100, 200, 300, 400};
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) {
      const Tile& t = tiles[r * 5 + c];
      EXPECT_EQ(t.col, c);
      EXPECT_EQ(t.row, r);
      EXPECT_EQ(t.origin_x, origins[c]);
      EXPECT_EQ(t.origin_y, origins[r]);
      EXPECT_EQ(t.width, 200);
      EXPECT_EQ(t.height, 200);
    }
  }
}

TEST(PlanTiles, SingleTileIsFullImage) {
  const auto tiles = plan_tiles(640, 640, {1, 1, 0.0});
  ASSERT_EQ(tiles.size(), 1u);
  EXPECT_EQ(tiles[0], (Tile{0, 0, 0, 0, 640, 640}));
}

TEST(PlanAxis, LastOriginClamped) {
  const auto a = plan_axis(605, 5, 0.5);
  EXPECT_EQ(a.extent, 202);
  EXPECT_EQ(a.origins, (std::vector<int>{0, 101, 202, 303, 403}));
}

TEST(PlanTiles, RejectsBadSpecs) {
  EXPECT_THROW(plan_tiles(600, 600, {0, 5, 0.5}), Error);
  EXPECT_THROW(plan_tiles(600, 600, {5, 5, 1.0}), Error);
  EXPECT_THROW(plan_tiles(600, 600, {5, 5, -0.1}), Error);
  EXPECT_THROW(plan_tiles(0, 600, {5, 5, 0.5}), Error);
}

TEST(PlanTiles, ImageSmallerThanGrid) {
  try {
    plan_tiles(3, 30, {8, 8, 0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidDimensions);
  }
  EXPECT_EQ(plan_tiles(8, 8, {8, 8, 0.5}).size(), 64u);
}

TEST(PlanTilesProperty, CoverageAndBounds) {
  oracle::Gen g(21);
  const double overlaps[] = {0.0, 0.25, 0.5};
  for (int i = 0; i < 150; ++i) {
    const int w = g.integer(8, 900);
    const int h = g.integer(8, 900);
    const TileGridSpec spec{g.integer(1, 8), g.integer(1, 8), overlaps[g.integer(0, 2)]};
    const auto tiles = plan_tiles(w, h, spec);
    ASSERT_EQ(tiles.size(), static_cast<std::size_t>(spec.n_cols * spec.n_rows));
    EXPECT_TRUE(oracle::tiles_cover(w, h, tiles)) << w << "x" << h;
    for (const auto& t : tiles) {
      EXPECT_EQ(t.width, tiles[0].width);
      EXPECT_EQ(t.height, tiles[0].height);
    }
  }
}

TEST(CropTile, FullImageIdentity) {
  Image img(4, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) img.set(x, y, {std::uint8_t(x * 10), std::uint8_t(y * 10), 7});
  EXPECT_EQ(crop_tile(img, {0, 0, 0, 0, 4, 3}), img);
}

TEST(CropTile, Checkerboard) {
  Image img(2, 2);
  img.set(0, 0, {255, 255, 255});
  img.set(1, 1, {255, 255, 255});
  const Image px = crop_tile(img, {1, 1, 1, 1, 1, 1});
  ASSERT_EQ(px.width(), 1);
  ASSERT_EQ(px.height(), 1);
  EXPECT_EQ(px.at(0, 0), (Rgb{255, 255, 255}));
}

TEST(CropTile, OutOfBounds) { EXPECT_THROW(crop_tile(Image(10, 10), {0, 0, 5, 5, 6, 6}), Error); }

TEST(RemapDetection, IdentityAtOrigin) {
  const Detection d{{10, 20, 30, 40}, 1, 0.5};
  EXPECT_EQ(remap_detection({0, 0, 0, 0, 200, 200}, d, 600, 600), d);
}

TEST(RemapDetection, Translation) {
  const Detection d{{10, 20, 30, 40}, 1, 0.5};
  EXPECT_EQ(remap_detection({0, 0, 100, 100, 200, 200}, d, 600, 600).bbox, (BBox{110, 120, 30, 40}));
}

TEST(RemapDetection, ClipsAtImageEdge) {
  const Detection d{{150, 150, 100, 100}, 1, 0.5};
  EXPECT_EQ(remap_detection({4, 4, 400, 400, 200, 200}, d, 600, 600).bbox, (BBox{550, 550, 50, 50}));
}

TEST(AssignGt, InsideOutsideAndHalf) {
  const Tile t{0, 0, 100, 100, 100, 100};
  const std::vector<GroundTruthBox> gts{
      {{120, 130, 10, 10}, 0, "a"},  // inside
      {{0, 0, 10, 10}, 1, "a"},      // outside
      {{90, 150, 20, 10}, 2, "a"},   // half inside
      {{80, 150, 20, 10}, 2, "a"},   // a quarter inside
  };
  const auto out = assign_gt_to_tile(t, gts, 0.5);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].bbox, (BBox{20, 30, 10, 10}));
  EXPECT_EQ(out[1].bbox, (BBox{0, 50, 10, 10}));
  EXPECT_EQ(out[1].class_id, 2);
}
