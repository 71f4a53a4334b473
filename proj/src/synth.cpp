#include "tiledet/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "tiledet/error.hpp"
#include "tiledet/parallel.hpp"
#include "tiledet/random.hpp"

namespace tiledet {

namespace fs = std::filesystem;

namespace {

constexpr std::array<Rgb, 6> kClassColors{{
    {220, 40, 40},
    {40, 190, 60},
    {50, 70, 230},
    {230, 200, 30},
    {200, 40, 200},
    {30, 200, 200},
}};

// Minimum free pixels between two objects.
constexpr int kGap = 2;
constexpr int kPlacementAttempts = 200;
constexpr int kNoiseCell = 16;

bool overlaps(const SynthObject& a, const SynthObject& b) {
  return a.x < b.x + b.w + kGap && b.x < a.x + a.w + kGap && a.y < b.y + b.h + kGap && b.y < a.y + a.h + kGap;
}

std::uint8_t clamp_channel(int v) { return static_cast<std::uint8_t>(std::clamp(v, 70, 210)); }

void draw_object(Image& img, const SynthObject& o) {
  const Rgb color = synth_class_color(o.class_id);
  if (synth_class_shape(o.class_id) == SynthShape::kRectangle) {
    fill_rect(img, o.x, o.y, o.x + o.w, o.y + o.h, color);
    return;
  }
  // Pixel centres inside the inscribed ellipse.
  const double rx = o.w / 2.0;
  const double ry = o.h / 2.0;
  for (int v = 0; v < o.h; ++v) {
    const double dy = (v + 0.5 - ry) / ry;
    for (int u = 0; u < o.w; ++u) {
      const double dx = (u + 0.5 - rx) / rx;
      if (dx * dx + dy * dy <= 1.0) img.set(o.x + u, o.y + v, color);
    }
  }
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.image_count < 0 || cfg.width < 1 || cfg.height < 1 || cfg.num_classes < 1 || cfg.min_objects < 0 ||
      cfg.min_objects > cfg.max_objects || cfg.min_object_size < 1 || cfg.min_object_size > cfg.max_object_size ||
      cfg.max_object_size > std::min(cfg.width, cfg.height)) {
    throw Error(ErrorKind::kInvalidArgument, "invalid synthetic dataset configuration");
  }
}

Rgb synth_class_color(int class_id) { return kClassColors[static_cast<std::size_t>(class_id) % kClassColors.size()]; }

SynthShape synth_class_shape(int class_id) {
  return class_id % 2 == 0 ? SynthShape::kEllipse : SynthShape::kRectangle;
}

std::string synth_image_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth_%05d", index);
  return buf;
}

std::vector<SynthObject> synth_layout(const SynthConfig& cfg, int index) {
  validate(cfg);
  Rng rng(derive_seed(cfg.seed, "layout/" + std::to_string(index)));
  const auto count = rng.uniform_int(std::int64_t{cfg.min_objects}, std::int64_t{cfg.max_objects});
  std::vector<SynthObject> objs;
  for (std::int64_t k = 0; k < count; ++k) {
    SynthObject o;
    o.class_id = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(cfg.num_classes)));
    o.w = static_cast<int>(rng.uniform_int(cfg.min_object_size, cfg.max_object_size));
    o.h = static_cast<int>(rng.uniform_int(cfg.min_object_size, cfg.max_object_size));
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      o.x = static_cast<int>(rng.uniform_int(0, cfg.width - o.w));
      o.y = static_cast<int>(rng.uniform_int(0, cfg.height - o.h));
      if (std::none_of(objs.begin(), objs.end(), [&](const SynthObject& p) { return overlaps(o, p); })) {
        objs.push_back(o);
        break;
      }
    }
  }
  return objs;
}

Image synth_render(const SynthConfig& cfg, int index, const std::vector<SynthObject>& layout) {
  validate(cfg);
  Rng rng(derive_seed(cfg.seed, "render/" + std::to_string(index)));
  const int base = static_cast<int>(rng.uniform_int(100, 160));
  const double gx = rng.uniform(-30.0, 30.0);
  const double gy = rng.uniform(-30.0, 30.0);
  std::array<int, 3> tint{};
  for (int& t : tint) t = static_cast<int>(rng.uniform_int(-12, 12));

  const int cells_x = (cfg.width + kNoiseCell - 1) / kNoiseCell;
  const int cells_y = (cfg.height + kNoiseCell - 1) / kNoiseCell;
  std::vector<int> noise(static_cast<std::size_t>(cells_x) * cells_y);
  for (int& n : noise) n = static_cast<int>(rng.uniform_int(-10, 10));

  Image img(cfg.width, cfg.height);
  for (int y = 0; y < cfg.height; ++y) {
    const double row = base + gy * y / cfg.height;
    const int* cell_row = &noise[static_cast<std::size_t>(y / kNoiseCell) * cells_x];
    for (int x = 0; x < cfg.width; ++x) {
      const int v = static_cast<int>(row + gx * x / cfg.width) + cell_row[x / kNoiseCell];
      img.set(x, y, {clamp_channel(v + tint[0]), clamp_channel(v + tint[1]), clamp_channel(v + tint[2])});
    }
  }

  // Clutter: a few flat near-gray patches.
  const auto patches = rng.uniform_int(std::int64_t{0}, std::int64_t{6});
  for (std::int64_t k = 0; k < patches; ++k) {
    const int pw = static_cast<int>(rng.uniform_int(cfg.width / 20 + 1, cfg.width / 5 + 1));
    const int ph = static_cast<int>(rng.uniform_int(cfg.height / 20 + 1, cfg.height / 5 + 1));
    const int px = static_cast<int>(rng.uniform_int(0, std::max(0, cfg.width - pw)));
    const int py = static_cast<int>(rng.uniform_int(0, std::max(0, cfg.height - ph)));
    const int level = static_cast<int>(rng.uniform_int(70, 210));
    fill_rect(img, px, py, px + pw, py + ph,
              {clamp_channel(level + tint[0]), clamp_channel(level + tint[1]), clamp_channel(level + tint[2])});
  }

  for (const SynthObject& o : layout) draw_object(img, o);
  return img;
}

DatasetManifest synth_manifest(const SynthConfig& cfg) {
  validate(cfg);
  std::vector<std::string> names;
  if (cfg.num_classes == static_cast<int>(default_categories().size())) {
    names = default_categories();
  } else {
    for (int c = 0; c < cfg.num_classes; ++c) names.push_back("class_" + std::to_string(c));
  }
  DatasetManifest m = make_manifest(std::move(names));
  std::int64_t next_ann = 1;
  for (int i = 0; i < cfg.image_count; ++i) {
    const std::string id = synth_image_id(i);
    m.images.push_back({id, "images/" + id + ".png", cfg.width, cfg.height, std::nullopt});
    for (const SynthObject& o : synth_layout(cfg, i)) {
      GroundTruthBox g{{double(o.x), double(o.y), double(o.w), double(o.h)}, o.class_id, id};
      m.annotations.push_back({next_ann++, std::move(g)});
    }
  }
  return m;
}

std::string synth_config_to_string(const SynthConfig& cfg) {
  nlohmann::json j{{"image_count", cfg.image_count},         {"width", cfg.width},
                   {"height", cfg.height},                   {"min_objects", cfg.min_objects},
                   {"max_objects", cfg.max_objects},         {"min_object_size", cfg.min_object_size},
                   {"max_object_size", cfg.max_object_size}, {"num_classes", cfg.num_classes},
                   {"seed", cfg.seed}};
  return j.dump(2) + "\n";
}

DatasetManifest synth_gen(const SynthConfig& cfg, const fs::path& out_dir, int threads) {
  DatasetManifest m = synth_manifest(cfg);
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "labels");
  parallel_for(static_cast<std::size_t>(cfg.image_count), threads, [&](std::size_t i) {
    const int idx = static_cast<int>(i);
    write_png(synth_render(cfg, idx, synth_layout(cfg, idx)), out_dir / m.images[i].file_name);
  });
  write_yolo_dir(m, out_dir / "labels");
  save_coco(m, out_dir / "manifest.json");
  std::ofstream(out_dir / "synth_config.json", std::ios::binary) << synth_config_to_string(cfg);
  return m;
}

}  // namespace tiledet
