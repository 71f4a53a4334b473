#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tiledet/geometry.hpp"
#include "tiledet/image.hpp"
#include "tiledet/tiling.hpp"

namespace tiledet {

enum class ViewKind { kFull, kTile };

/// Describes the view handed to a detector: the full image or one tile.
struct ViewMeta {
  std::string image_id;
  ViewKind kind = ViewKind::kFull;
  /// Tile placement in the image frame; for a full view this is the whole image.
  Tile tile;
  /// Side of the square model input the view is resized to.
  int input_size = 640;

  int width() const { return tile.width; }
  int height() const { return tile.height; }
  /// "full" or "tile_<col>_<row>".
  std::string key() const;

  static ViewMeta full(std::string image_id, int width, int height, int input_size = 640);
  static ViewMeta of_tile(std::string image_id, const Tile& tile, int input_size = 640);
};

/// Aspect-preserving scale into a target x target square with centred padding.
struct LetterboxTransform {
  double scale = 1.0;
  double pad_x = 0.0;
  double pad_y = 0.0;
  int target = 640;

  BBox forward(const BBox& b) const;
  BBox inverse(const BBox& b) const;
};

LetterboxTransform letterbox_transform(int width, int height, int target);

struct Letterboxed {
  Image raster;
  LetterboxTransform transform;
};

inline constexpr Rgb kLetterboxPad{114, 114, 114};

/// Resizes by target/max(W,H) and pads to target x target with mid-gray.
/// Content size is round(W*s) x round(H*s); padding is split with the
/// extra pixel, if any, at the bottom/right.
Letterboxed letterbox(const Image& view, int target);

/// Detection back-end. Implementations must be safe to call concurrently and
/// deterministic in (view, meta, seed). Returned boxes are in the view frame.
/// `view` may be empty when the caller has no pixels; back-ends that need
/// pixels report that through needs_pixels() and throw on an empty view.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Detection> detect(const Image& view, const ViewMeta& meta, std::uint64_t seed) const = 0;
  virtual std::string kind() const = 0;
  virtual bool needs_pixels() const { return false; }
};

/// Resolution-degradation model of a small-object detector.
struct OracleParams {
  int input_size = 640;
  double area_ref = 1024.0;
  double jitter = 0.05;
  double fp_rate = 0.5;
  double score_noise = 0.05;
  int num_classes = 3;
};

void validate(const OracleParams& p);

/// Detection probability of a view-frame box after resizing the view so that
/// its longer side equals params.input_size: min(1, area*s^2 / area_ref).
double oracle_detection_probability(const BBox& box, int view_width, int view_height, const OracleParams& params);

/// Simulated detector output for one view. Draw order, from a single Rng(seed):
///   for each ground-truth box in order:
///     uniform (detect iff < p), normal x4 (x, y, w, h jitter), normal (score);
///     all six draws are consumed whether or not the box is detected;
///   poisson(fp_rate) false-positive count k, then for each false positive:
///     uniform w, uniform h, uniform x, uniform y, uniform_int class, uniform score.
/// Jittered extents are floored at 0.5 px and every box is clipped to the view;
/// a box clipped to zero area is dropped.
std::vector<Detection> oracle_detect(int view_width, int view_height, std::span<const GroundTruthBox> gts,
                                     const OracleParams& params, std::uint64_t seed);

/// Oracle bound to a ground-truth table. The per-call seed is derived from
/// (seed, image id, view key); ground truth for a tile view is the boxes that
/// are at least `min_visible_ratio` visible in it. Unknown image ids have no
/// ground truth and only produce false positives.
class OracleDetector final : public Detector {
 public:
  OracleDetector(std::span<const GroundTruthBox> gts, OracleParams params, double min_visible_ratio = 0.5);

  std::vector<Detection> detect(const Image& view, const ViewMeta& meta, std::uint64_t seed) const override;
  std::string kind() const override { return "oracle"; }
  const OracleParams& params() const { return params_; }

 private:
  std::map<std::string, std::vector<GroundTruthBox>> by_image_;
  OracleParams params_;
  double min_visible_ratio_;
};

/// Precomputed detections keyed by image id, then by view key.
struct ReplayStore {
  std::map<std::string, std::map<std::string, std::vector<Detection>>> entries;

  friend bool operator==(const ReplayStore&, const ReplayStore&) = default;
};

std::string replay_store_to_string(const ReplayStore& store);
ReplayStore replay_store_from_string(const std::string& text);
ReplayStore load_replay_store(const std::filesystem::path& path);
void save_replay_store(const ReplayStore& store, const std::filesystem::path& path);

class ReplayDetector final : public Detector {
 public:
  explicit ReplayDetector(ReplayStore store) : store_(std::move(store)) {}

  /// Throws kNotFound when the store has no entry for (image id, view key).
  std::vector<Detection> detect(const Image& view, const ViewMeta& meta, std::uint64_t seed) const override;
  std::string kind() const override { return "replay"; }

 private:
  ReplayStore store_;
};

}  // namespace tiledet
