#pragma once

#include <span>
#include <string>
#include <vector>

#include "tiledet/geometry.hpp"
#include "tiledet/image.hpp"

namespace tiledet {

/// Grid of n_cols x n_rows tiles; `overlap` is the fraction of a tile's extent
/// shared by consecutive tiles on an axis.
struct TileGridSpec {
  int n_cols = 5;
  int n_rows = 5;
  double overlap = 0.5;

  friend bool operator==(const TileGridSpec&, const TileGridSpec&) = default;
};

struct Tile {
  int col = 0;
  int row = 0;
  int origin_x = 0;
  int origin_y = 0;
  int width = 0;
  int height = 0;

  BBox bbox() const { return {double(origin_x), double(origin_y), double(width), double(height)}; }
  friend bool operator==(const Tile&, const Tile&) = default;
};

void validate(const TileGridSpec& spec);

/// Tile extent and integer origins along one axis of length `length`.
struct AxisPlan {
  int extent = 0;
  std::vector<int> origins;
};
AxisPlan plan_axis(int length, int count, double overlap);

/// Row-major tile plan covering every pixel of a width x height image.
/// Extent per axis is ceil(L / (N - (N-1)*overlap)), stride extent*(1-overlap),
/// origins round(i*stride) clamped to L - extent.
std::vector<Tile> plan_tiles(int image_width, int image_height, const TileGridSpec& spec);

Image crop_tile(const Image& image, const Tile& tile);

/// Translates a tile-frame detection into the image frame and clips it.
Detection remap_detection(const Tile& tile, const Detection& det, int image_width, int image_height);

/// Ground truth visible in a tile: kept when (area inside tile)/(box area) is at
/// least `min_visible_ratio`, then clipped and expressed in tile coordinates.
std::vector<GroundTruthBox> assign_gt_to_tile(const Tile& tile, std::span<const GroundTruthBox> gts,
                                              double min_visible_ratio);

}  // namespace tiledet
