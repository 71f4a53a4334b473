#include "tiledet/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "tiledet/error.hpp"
#include "tiledet/parallel.hpp"

namespace tiledet {

void validate(const PipelineConfig& cfg) {
  if (cfg.tiling_enabled) validate(cfg.grid);
  validate(cfg.nms);
  if (cfg.input_size < 1) throw Error(ErrorKind::kInvalidArgument, "detector input size must be >= 1");
  if (!(cfg.score_floor >= 0.0 && cfg.score_floor < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "score floor must lie in [0,1)");
  }
  if (cfg.filter) validate(cfg.filter->hist);
}

bool pipeline_needs_pixels(const Detector& detector, const PipelineConfig& cfg) {
  return detector.needs_pixels() || (cfg.tiling_enabled && cfg.filter != nullptr);
}

namespace {

[[noreturn]] void rethrow_for_view(const ViewMeta& meta, const Error& e) {
  throw Error(e.kind(), "view " + meta.image_id + "/" + meta.key() + ": " + e.what());
}

std::vector<Detection> detect_view(const Detector& detector, const Image& view, const ViewMeta& meta,
                                   std::uint64_t seed) {
  try {
    return detector.detect(view, meta, seed);
  } catch (const Error& e) {
    rethrow_for_view(meta, e);
  }
}

}  // namespace

PipelineResult run_pipeline_traced(const std::string& image_id, int width, int height, const Image& raster,
                                   const Detector& detector, const PipelineConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (width < 1 || height < 1) throw Error(ErrorKind::kInvalidDimensions, "image " + image_id + " is empty");
  const bool have_pixels = !raster.empty();
  if (have_pixels && (raster.width() != width || raster.height() != height)) {
    throw Error(ErrorKind::kInvalidDimensions, "raster size does not match declared size for " + image_id);
  }
  if (!have_pixels && pipeline_needs_pixels(detector, cfg)) {
    throw Error(ErrorKind::kInvalidArgument, "pixels of " + image_id + " are required but were not loaded");
  }

  PipelineResult res;
  auto keep_candidate = [&](const Detection& d) {
    if (d.score >= cfg.score_floor) res.candidates.push_back(d);
  };

  const ViewMeta full = ViewMeta::full(image_id, width, height, cfg.input_size);
  for (const Detection& d : detect_view(detector, raster, full, seed)) {
    Detection clipped = d;
    clipped.bbox = clip_to(d.bbox, width, height);
    if (clipped.bbox.area() > 0.0) keep_candidate(clipped);
  }

  if (cfg.tiling_enabled) {
    res.tiles_planned = plan_tiles(width, height, cfg.grid);
    for (const Tile& tile : res.tiles_planned) {
      const ViewMeta meta = ViewMeta::of_tile(image_id, tile, cfg.input_size);
      Image view;
      if (have_pixels) view = crop_tile(raster, tile);
      if (cfg.filter) {
        try {
          const auto feature = histogram_feature(view, cfg.filter->hist);
          if (!svm_predict(*cfg.filter, feature, cfg.filter_offset).positive) continue;
        } catch (const Error& e) {
          rethrow_for_view(meta, e);
        }
      }
      res.tiles_kept.push_back(tile);
      for (const Detection& d : detect_view(detector, view, meta, seed)) {
        Detection local = d;
        local.bbox = clip_to(d.bbox, tile.width, tile.height);
        const Detection mapped = remap_detection(tile, local, width, height);
        if (mapped.bbox.area() > 0.0) keep_candidate(mapped);
      }
    }
  }

  res.detections = nms(res.candidates, cfg.nms);
  return res;
}

std::vector<Detection> run_pipeline(const std::string& image_id, const Image& raster, const Detector& detector,
                                    const PipelineConfig& cfg, std::uint64_t seed) {
  return run_pipeline_traced(image_id, raster.width(), raster.height(), raster, detector, cfg, seed).detections;
}

std::vector<Prediction> run_batch(std::span<const BenchImage> images, const Detector& detector,
                                  const PipelineConfig& cfg, std::uint64_t seed, const RasterLoader& loader,
                                  int threads) {
  const bool pixels = pipeline_needs_pixels(detector, cfg);
  if (pixels && !loader) throw Error(ErrorKind::kInvalidArgument, "this configuration needs image pixels");
  std::vector<std::vector<Detection>> per_image(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    const BenchImage& img = images[i];
    const Image raster = pixels ? loader(i) : Image{};
    per_image[i] = run_pipeline_traced(img.id, img.width, img.height, raster, detector, cfg, seed).detections;
  });
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (const Detection& d : per_image[i]) out.push_back({images[i].id, d});
  }
  return out;
}

Comparison compare_runs(std::span<const BenchImage> images, std::span<const GroundTruthBox> gts,
                        const std::vector<std::string>& categories, const Detector& detector,
                        const PipelineConfig& cfg_tiled, const PipelineConfig& cfg_untiled, std::uint64_t seed,
                        const RasterLoader& loader, int threads) {
  Comparison cmp;
  const auto tiled = run_batch(images, detector, cfg_tiled, seed, loader, threads);
  const auto untiled = run_batch(images, detector, cfg_untiled, seed, loader, threads);
  cmp.tiled = evaluate(tiled, gts, categories);
  cmp.untiled = evaluate(untiled, gts, categories);
  for (std::size_t c = 0; c < categories.size(); ++c) {
    cmp.delta_ap50.push_back(cmp.tiled.ap50(c) - cmp.untiled.ap50(c));
    cmp.delta_ap50_95.push_back(cmp.tiled.ap50_95(c) - cmp.untiled.ap50_95(c));
  }
  cmp.delta_map50 = cmp.tiled.map50 - cmp.untiled.map50;
  cmp.delta_map50_95 = cmp.tiled.map50_95 - cmp.untiled.map50_95;
  cmp.delta_recall50 = cmp.tiled.counts50.recall() - cmp.untiled.counts50.recall();
  return cmp;
}

std::string comparison_to_json(const Comparison& cmp, int indent) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j;
  j["tiled"] = json::parse(report_to_json(cmp.tiled));
  j["untiled"] = json::parse(report_to_json(cmp.untiled));
  json deltas;
  json per_class = json::array();
  for (std::size_t c = 0; c < cmp.delta_ap50.size(); ++c) {
    per_class.push_back({{"class", cmp.tiled.categories[c]},
                         {"ap50", num(cmp.delta_ap50[c])},
                         {"ap50_95", num(cmp.delta_ap50_95[c])}});
  }
  deltas["per_class"] = std::move(per_class);
  deltas["map50"] = num(cmp.delta_map50);
  deltas["map50_95"] = num(cmp.delta_map50_95);
  deltas["recall50"] = num(cmp.delta_recall50);
  j["delta"] = std::move(deltas);
  return j.dump(indent) + "\n";
}

}  // namespace tiledet
