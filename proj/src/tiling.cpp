#include "tiledet/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tiledet/error.hpp"

namespace tiledet {

void validate(const TileGridSpec& spec) {
  if (spec.n_cols < 1 || spec.n_rows < 1) {
    throw Error(ErrorKind::kInvalidArgument, "tile grid needs at least one column and one row");
  }
  if (!(spec.overlap >= 0.0 && spec.overlap < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "tile overlap must lie in [0,1), got " + std::to_string(spec.overlap));
  }
}

AxisPlan plan_axis(int length, int count, double overlap) {
  AxisPlan plan;
  const double span = count - (count - 1) * overlap;
  // The epsilon absorbs representation error in exact divisions (600/3).
  plan.extent = static_cast<int>(std::ceil(length / span - 1e-9));
  plan.extent = std::clamp(plan.extent, 1, length);
  const double stride = plan.extent * (1.0 - overlap);
  plan.origins.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int origin = static_cast<int>(std::lround(i * stride));
    plan.origins.push_back(std::min(origin, length - plan.extent));
  }
  return plan;
}

std::vector<Tile> plan_tiles(int image_width, int image_height, const TileGridSpec& spec) {
  validate(spec);
  if (image_width < spec.n_cols || image_height < spec.n_rows) {
    throw Error(ErrorKind::kInvalidDimensions,
                "image " + std::to_string(image_width) + "x" + std::to_string(image_height) +
                    " is smaller than the " + std::to_string(spec.n_cols) + "x" + std::to_string(spec.n_rows) +
                    " tile grid");
  }
  const AxisPlan xs = plan_axis(image_width, spec.n_cols, spec.overlap);
  const AxisPlan ys = plan_axis(image_height, spec.n_rows, spec.overlap);

  std::vector<Tile> tiles;
  tiles.reserve(static_cast<std::size_t>(spec.n_cols) * spec.n_rows);
  for (int r = 0; r < spec.n_rows; ++r) {
    for (int c = 0; c < spec.n_cols; ++c) {
      tiles.push_back({c, r, xs.origins[c], ys.origins[r], xs.extent, ys.extent});
    }
  }
  return tiles;
}

Image crop_tile(const Image& image, const Tile& tile) {
  if (tile.width < 1 || tile.height < 1 || tile.origin_x < 0 || tile.origin_y < 0 ||
      tile.origin_x + tile.width > image.width() || tile.origin_y + tile.height > image.height()) {
    throw Error(ErrorKind::kOutOfBounds, "tile (" + std::to_string(tile.origin_x) + "," +
                                             std::to_string(tile.origin_y) + "," + std::to_string(tile.width) +
                                             "," + std::to_string(tile.height) + ") exceeds image " +
                                             std::to_string(image.width()) + "x" + std::to_string(image.height()));
  }
  Image out(tile.width, tile.height);
  const auto src = image.bytes();
  auto dst = out.bytes();
  const std::size_t row_bytes = static_cast<std::size_t>(tile.width) * 3;
  for (int v = 0; v < tile.height; ++v) {
    const std::size_t from = (static_cast<std::size_t>(tile.origin_y + v) * image.width() + tile.origin_x) * 3;
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from), row_bytes,
                dst.begin() + static_cast<std::ptrdiff_t>(v * row_bytes));
  }
  return out;
}

Detection remap_detection(const Tile& tile, const Detection& det, int image_width, int image_height) {
  Detection out = det;
  out.bbox.x += tile.origin_x;
  out.bbox.y += tile.origin_y;
  out.bbox = clip_to(out.bbox, image_width, image_height);
  return out;
}

std::vector<GroundTruthBox> assign_gt_to_tile(const Tile& tile, std::span<const GroundTruthBox> gts,
                                              double min_visible_ratio) {
  const BBox frame = tile.bbox();
  std::vector<GroundTruthBox> out;
  for (const GroundTruthBox& gt : gts) {
    const double area = gt.bbox.area();
    if (area <= 0.0) continue;
    const double inter = intersection_area(gt.bbox, frame);
    if (inter <= 0.0 || inter / area < min_visible_ratio) continue;
    GroundTruthBox local = gt;
    local.bbox.x -= tile.origin_x;
    local.bbox.y -= tile.origin_y;
    local.bbox = clip_to(local.bbox, tile.width, tile.height);
    out.push_back(std::move(local));
  }
  return out;
}

}  // namespace tiledet
