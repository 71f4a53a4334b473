#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tiledet/detector.hpp"
#include "tiledet/geometry.hpp"
#include "tiledet/image.hpp"
#include "tiledet/metrics.hpp"
#include "tiledet/tile_filter.hpp"
#include "tiledet/tiling.hpp"

namespace tiledet {

struct PipelineConfig {
  bool tiling_enabled = true;
  TileGridSpec grid;
  /// Tile filter; tiles it classifies negative are skipped. Null keeps all tiles.
  std::shared_ptr<const LinearSvmModel> filter;
  double filter_offset = 0.0;
  NmsConfig nms;
  int input_size = 640;
  /// Candidates scoring below this are dropped before NMS.
  double score_floor = 0.01;
};

void validate(const PipelineConfig& cfg);

struct PipelineResult {
  /// Final detections in the image frame, by descending score.
  std::vector<Detection> detections;
  /// Full-image candidates followed by tile candidates in row-major tile
  /// order, after the score floor and before NMS.
  std::vector<Detection> candidates;
  std::vector<Tile> tiles_planned;
  std::vector<Tile> tiles_kept;
};

/// Full-image pass, filtered tile passes, remap, joint NMS. `raster` may be
/// empty when neither the detector nor the filter needs pixels; width and
/// height then give the image size.
PipelineResult run_pipeline_traced(const std::string& image_id, int width, int height, const Image& raster,
                                   const Detector& detector, const PipelineConfig& cfg, std::uint64_t seed);

std::vector<Detection> run_pipeline(const std::string& image_id, const Image& raster, const Detector& detector,
                                    const PipelineConfig& cfg, std::uint64_t seed);

/// True when running `cfg` with `detector` requires decoded pixels.
bool pipeline_needs_pixels(const Detector& detector, const PipelineConfig& cfg);

struct BenchImage {
  std::string id;
  int width = 0;
  int height = 0;
};

/// Returns the raster of the i-th bench image.
using RasterLoader = std::function<Image(std::size_t)>;

struct Comparison {
  EvalReport tiled;
  EvalReport untiled;
  /// Per class (tiled - untiled) AP at 0.5 and 0.5:0.95.
  std::vector<double> delta_ap50;
  std::vector<double> delta_ap50_95;
  double delta_map50 = 0.0;
  double delta_map50_95 = 0.0;
  double delta_recall50 = 0.0;
};

/// Runs every image through both configurations and evaluates each run.
/// `loader` is only called when pixels are needed. Images are processed on up
/// to `threads` workers; results do not depend on the thread count.
Comparison compare_runs(std::span<const BenchImage> images, std::span<const GroundTruthBox> gts,
                        const std::vector<std::string>& categories, const Detector& detector,
                        const PipelineConfig& cfg_tiled, const PipelineConfig& cfg_untiled, std::uint64_t seed,
                        const RasterLoader& loader = {}, int threads = 1);

/// Runs one configuration over a set of images; predictions keep image order.
std::vector<Prediction> run_batch(std::span<const BenchImage> images, const Detector& detector,
                                  const PipelineConfig& cfg, std::uint64_t seed, const RasterLoader& loader = {},
                                  int threads = 1);

std::string comparison_to_json(const Comparison& cmp, int indent = 2);

}  // namespace tiledet
