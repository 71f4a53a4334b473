#include "tiledet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tiledet/error.hpp"
#include "tiledet/random.hpp"

namespace tiledet {

using nlohmann::json;

std::string ViewMeta::key() const {
  if (kind == ViewKind::kFull) return "full";
  return "tile_" + std::to_string(tile.col) + "_" + std::to_string(tile.row);
}

ViewMeta ViewMeta::full(std::string image_id, int width, int height, int input_size) {
  ViewMeta m;
  m.image_id = std::move(image_id);
  m.kind = ViewKind::kFull;
  m.tile = {0, 0, 0, 0, width, height};
  m.input_size = input_size;
  return m;
}

ViewMeta ViewMeta::of_tile(std::string image_id, const Tile& tile, int input_size) {
  ViewMeta m;
  m.image_id = std::move(image_id);
  m.kind = ViewKind::kTile;
  m.tile = tile;
  m.input_size = input_size;
  return m;
}

BBox LetterboxTransform::forward(const BBox& b) const {
  return {b.x * scale + pad_x, b.y * scale + pad_y, b.w * scale, b.h * scale};
}

BBox LetterboxTransform::inverse(const BBox& b) const {
  return {(b.x - pad_x) / scale, (b.y - pad_y) / scale, b.w / scale, b.h / scale};
}

namespace {

struct ContentSize {
  int w;
  int h;
};

ContentSize content_size(int width, int height, double scale) {
  return {std::max(1, static_cast<int>(std::lround(width * scale))),
          std::max(1, static_cast<int>(std::lround(height * scale)))};
}

}  // namespace

LetterboxTransform letterbox_transform(int width, int height, int target) {
  if (target < 1 || width < 1 || height < 1) {
    throw Error(ErrorKind::kInvalidDimensions, "letterbox needs positive sizes");
  }
  LetterboxTransform t;
  t.target = target;
  t.scale = static_cast<double>(target) / std::max(width, height);
  const ContentSize c = content_size(width, height, t.scale);
  t.pad_x = (target - c.w) / 2;
  t.pad_y = (target - c.h) / 2;
  return t;
}

Letterboxed letterbox(const Image& view, int target) {
  Letterboxed out;
  out.transform = letterbox_transform(view.width(), view.height(), target);
  const ContentSize c = content_size(view.width(), view.height(), out.transform.scale);
  const Image content = resize(view, c.w, c.h);
  out.raster = Image(target, target, kLetterboxPad);
  const int px = static_cast<int>(out.transform.pad_x);
  const int py = static_cast<int>(out.transform.pad_y);
  for (int y = 0; y < c.h; ++y) {
    for (int x = 0; x < c.w; ++x) out.raster.set(px + x, py + y, content.at(x, y));
  }
  return out;
}

void validate(const OracleParams& p) {
  if (p.input_size < 1 || p.area_ref < 0.0 || p.jitter < 0.0 || p.fp_rate < 0.0 || p.score_noise < 0.0 ||
      p.num_classes < 1) {
    throw Error(ErrorKind::kInvalidArgument, "oracle parameters must be non-negative, input size and classes >= 1");
  }
}

double oracle_detection_probability(const BBox& box, int view_width, int view_height, const OracleParams& params) {
  const double s = static_cast<double>(params.input_size) / std::max(view_width, view_height);
  const double effective = box.area() * s * s;
  if (params.area_ref <= 0.0) return 1.0;
  return std::min(1.0, effective / params.area_ref);
}

std::vector<Detection> oracle_detect(int view_width, int view_height, std::span<const GroundTruthBox> gts,
                                     const OracleParams& params, std::uint64_t seed) {
  validate(params);
  Rng rng(seed);
  const double vw = view_width;
  const double vh = view_height;
  std::vector<Detection> out;

  for (const GroundTruthBox& gt : gts) {
    const double p = oracle_detection_probability(gt.bbox, view_width, view_height, params);
    const double u = rng.uniform();
    const double sigma = params.jitter * std::min(gt.bbox.w, gt.bbox.h);
    const double dx = rng.normal(0.0, sigma);
    const double dy = rng.normal(0.0, sigma);
    const double dw = rng.normal(0.0, sigma);
    const double dh = rng.normal(0.0, sigma);
    const double ds = rng.normal(0.0, params.score_noise);
    if (!(u < p)) continue;

    Detection d;
    d.class_id = gt.class_id;
    d.bbox = {gt.bbox.x + dx, gt.bbox.y + dy, std::max(0.5, gt.bbox.w + dw), std::max(0.5, gt.bbox.h + dh)};
    d.bbox = clip_to(d.bbox, vw, vh);
    d.score = std::clamp(p + ds, 0.0, 1.0);
    if (d.bbox.area() > 0.0) out.push_back(d);
  }

  const int n_fp = rng.poisson(params.fp_rate);
  for (int k = 0; k < n_fp; ++k) {
    const double fw = vw * rng.uniform(0.01, 0.1);
    const double fh = vh * rng.uniform(0.01, 0.1);
    const double fx = rng.uniform(0.0, vw - fw);
    const double fy = rng.uniform(0.0, vh - fh);
    const int cls = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(params.num_classes)));
    const double score = rng.uniform(0.05, 0.5);
    Detection d{clip_to({fx, fy, fw, fh}, vw, vh), cls, score};
    if (d.bbox.area() > 0.0) out.push_back(d);
  }
  return out;
}

OracleDetector::OracleDetector(std::span<const GroundTruthBox> gts, OracleParams params, double min_visible_ratio)
    : params_(params), min_visible_ratio_(min_visible_ratio) {
  validate(params_);
  for (const GroundTruthBox& gt : gts) by_image_[gt.image_id].push_back(gt);
}

std::vector<Detection> OracleDetector::detect(const Image& /*view*/, const ViewMeta& meta, std::uint64_t seed) const {
  OracleParams p = params_;
  p.input_size = meta.input_size;
  const std::uint64_t sub_seed = derive_seed(seed, meta.image_id + "|" + meta.key());

  std::vector<GroundTruthBox> local;
  if (auto it = by_image_.find(meta.image_id); it != by_image_.end()) {
    if (meta.kind == ViewKind::kFull) {
      local = it->second;
    } else {
      local = assign_gt_to_tile(meta.tile, it->second, min_visible_ratio_);
    }
  }
  return oracle_detect(meta.width(), meta.height(), local, p, sub_seed);
}

namespace {

json detection_to_json(const Detection& d) {
  return {{"class_id", d.class_id}, {"score", d.score}, {"x", d.bbox.x}, {"y", d.bbox.y}, {"w", d.bbox.w},
          {"h", d.bbox.h}};
}

Detection detection_from_json(const json& j) {
  Detection d;
  d.class_id = j.at("class_id").get<int>();
  d.score = j.at("score").get<double>();
  d.bbox = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(), j.at("h").get<double>()};
  if (!(d.score >= 0.0 && d.score <= 1.0) || d.class_id < 0 || d.bbox.w < 0.0 || d.bbox.h < 0.0) {
    throw Error(ErrorKind::kFormat, "replay detection out of range");
  }
  return d;
}

}  // namespace

std::string replay_store_to_string(const ReplayStore& store) {
  json images = json::array();
  for (const auto& [image_id, views] : store.entries) {
    json jv = json::object();
    for (const auto& [key, dets] : views) {
      json list = json::array();
      for (const Detection& d : dets) list.push_back(detection_to_json(d));
      jv[key] = std::move(list);
    }
    images.push_back({{"image_id", image_id}, {"views", std::move(jv)}});
  }
  json doc{{"format", "tiledet-replay-store"}, {"version", 1}, {"images", std::move(images)}};
  return doc.dump(2) + "\n";
}

ReplayStore replay_store_from_string(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != "tiledet-replay-store") {
      throw Error(ErrorKind::kFormat, "not a replay store");
    }
    ReplayStore store;
    for (const json& img : doc.at("images")) {
      auto& views = store.entries[img.at("image_id").get<std::string>()];
      for (const auto& [key, list] : img.at("views").items()) {
        auto& dets = views[key];
        for (const json& d : list) dets.push_back(detection_from_json(d));
      }
    }
    return store;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("malformed replay store: ") + e.what());
  }
}

ReplayStore load_replay_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kNotFound, "cannot open replay store " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return replay_store_from_string(ss.str());
}

void save_replay_store(const ReplayStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << replay_store_to_string(store);
}

std::vector<Detection> ReplayDetector::detect(const Image& /*view*/, const ViewMeta& meta,
                                              std::uint64_t /*seed*/) const {
  const auto img = store_.entries.find(meta.image_id);
  if (img == store_.entries.end()) {
    throw Error(ErrorKind::kNotFound, "replay store has no image '" + meta.image_id + "'");
  }
  const auto view = img->second.find(meta.key());
  if (view == img->second.end()) {
    throw Error(ErrorKind::kNotFound, "replay store has no view '" + meta.key() + "' for image '" + meta.image_id + "'");
  }
  return view->second;
}

}  // namespace tiledet
