#include <gtest/gtest.h>

#include <filesystem>

#include "tiledet/data_io.hpp"
#include "tiledet/error.hpp"
#include "tiledet/synth.hpp"

using namespace tiledet;
namespace fs = std::filesystem;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.image_count = 4;
  cfg.width = 320;
  cfg.height = 240;
  cfg.seed = 17;
  return cfg;
}

bool is_object_colour(Rgb c, int classes) {
  for (int k = 0; k < classes; ++k)
    if (c == synth_class_color(k)) return true;
  return false;
}

}  // namespace

TEST(Synth, LayoutWithinBounds) {
  const SynthConfig cfg = small_config();
  for (int i = 0; i < 20; ++i) {
    const auto objs = synth_layout(cfg, i);
    EXPECT_GE(objs.size(), 5u);
    EXPECT_LE(objs.size(), 15u);
    for (const auto& o : objs) {
      EXPECT_GE(o.w, 10);
      EXPECT_LE(o.w, 40);
      EXPECT_GE(o.x, 0);
      EXPECT_LE(o.x + o.w, cfg.width);
      EXPECT_LE(o.y + o.h, cfg.height);
      EXPECT_LT(o.class_id, 3);
    }
    for (std::size_t a = 0; a < objs.size(); ++a)
      for (std::size_t b = a + 1; b < objs.size(); ++b) {
        const BBox pa{double(objs[a].x), double(objs[a].y), double(objs[a].w), double(objs[a].h)};
        const BBox pb{double(objs[b].x), double(objs[b].y), double(objs[b].w), double(objs[b].h)};
        EXPECT_LE(iou(pa, pb), 0.3);
      }
  }
}

TEST(Synth, LabelsAreTightBoxes) {
  // Every object-coloured pixel lies in its object's box, and each box's
  // object-coloured pixels touch all four sides of the box.
  const SynthConfig cfg = small_config();
  for (int i = 0; i < cfg.image_count; ++i) {
    const auto objs = synth_layout(cfg, i);
    const Image img = synth_render(cfg, i, objs);
    for (const auto& o : objs) {
      const Rgb c = synth_class_color(o.class_id);
      int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
      for (int y = o.y; y < o.y + o.h; ++y)
        for (int x = o.x; x < o.x + o.w; ++x)
          if (img.at(x, y) == c) {
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
          }
      EXPECT_EQ(x0, o.x);
      EXPECT_EQ(y0, o.y);
      EXPECT_EQ(x1, o.x + o.w - 1);
      EXPECT_EQ(y1, o.y + o.h - 1);
    }
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        if (!is_object_colour(img.at(x, y), cfg.num_classes)) continue;
        bool inside = false;
        for (const auto& o : objs) inside |= x >= o.x && x < o.x + o.w && y >= o.y && y < o.y + o.h;
        EXPECT_TRUE(inside) << x << "," << y;
      }
  }
}

TEST(Synth, ZeroImages) {
  SynthConfig cfg = small_config();
  cfg.image_count = 0;
  EXPECT_TRUE(synth_manifest(cfg).images.empty());
}

TEST(Synth, InvalidConfig) {
  SynthConfig cfg = small_config();
  cfg.min_objects = 9;
  cfg.max_objects = 3;
  EXPECT_THROW(validate(cfg), Error);
  cfg = small_config();
  cfg.max_object_size = 1000;
  EXPECT_THROW(validate(cfg), Error);
}

TEST(Synth, GenIsByteIdentical) {
  const fs::path a = fs::temp_directory_path() / "tiledet_synth_a";
  const fs::path b = fs::temp_directory_path() / "tiledet_synth_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const auto ma = synth_gen(small_config(), a, 1);
  synth_gen(small_config(), b, 3);
  EXPECT_EQ(ma, synth_manifest(small_config()));
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    EXPECT_EQ(read_file_bytes(e.path()), read_file_bytes(b / rel)) << rel;
  }
  const auto loaded = load_coco(a / "manifest.json");
  EXPECT_EQ(loaded.images.size(), 4u);
  const Image img = read_image(a / loaded.images[0].file_name);
  EXPECT_EQ(img.width(), 320);
  EXPECT_EQ(img, synth_render(small_config(), 0, synth_layout(small_config(), 0)));
  fs::remove_all(a);
  fs::remove_all(b);
}
