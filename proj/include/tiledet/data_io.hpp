#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tiledet/geometry.hpp"
#include "tiledet/tiling.hpp"

namespace tiledet {

/// Category names used when none are given.
const std::vector<std::string>& default_categories();

/// Where a tile image was cropped from.
struct TileProvenance {
  std::string source_id;
  int col = 0;
  int row = 0;

  friend bool operator==(const TileProvenance&, const TileProvenance&) = default;
};

struct ImageRecord {
  std::string id;
  /// Relative to the manifest's image root.
  std::string file_name;
  int width = 0;
  int height = 0;
  std::optional<TileProvenance> provenance;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Annotation {
  std::int64_t id = 0;
  GroundTruthBox box;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// Images, annotations and ordered categories. Class ids are dense indices into
/// `categories`; `category_ids` keeps the external id of each category.
struct DatasetManifest {
  std::vector<std::string> categories;
  std::vector<std::int64_t> category_ids;
  std::vector<ImageRecord> images;
  std::vector<Annotation> annotations;

  std::vector<GroundTruthBox> ground_truth() const;
  std::vector<GroundTruthBox> ground_truth_of(const std::string& image_id) const;
  const ImageRecord* find_image(const std::string& id) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Throws kFormat on duplicate image ids, dangling references or class ids
/// outside the category list.
void validate(const DatasetManifest& m);

/// Manifest with the given categories and external ids 1..n.
DatasetManifest make_manifest(std::vector<std::string> categories);

/// Parses "class cx cy w h" lines (normalised centre form). Blank lines and
/// extra whitespace are ignored. Throws kFormat naming the line on malformed
/// input and kOutOfBounds for coordinates outside [0,1].
std::vector<GroundTruthBox> parse_yolo_labels(const std::string& text, int image_width, int image_height,
                                              const std::string& image_id = {});

/// One line per box, coordinates with 6 decimals.
std::string emit_yolo_labels(const std::vector<GroundTruthBox>& gts, int image_width, int image_height);

DatasetManifest coco_from_string(const std::string& text);
std::string coco_to_string(const DatasetManifest& m, int indent = 2);
DatasetManifest load_coco(const std::filesystem::path& path);
void save_coco(const DatasetManifest& m, const std::filesystem::path& path);

/// Writes one YOLO label file per image (<stem>.txt) into `dir`.
void write_yolo_dir(const DatasetManifest& m, const std::filesystem::path& dir);
/// Builds a manifest from a YOLO labels directory. Image sizes come from the
/// image files; images without a label file have no annotations.
DatasetManifest read_yolo_dir(const std::filesystem::path& images_dir, const std::filesystem::path& labels_dir,
                              std::vector<std::string> categories);

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;
};

void validate(const SplitSpec& spec);

struct DatasetSplit {
  DatasetManifest train;
  DatasetManifest val;
  DatasetManifest test;
};

/// Image-level seeded shuffle; train takes floor(n*train) images, val the next
/// floor(n*val), test the rest.
DatasetSplit split(const DatasetManifest& m, const SplitSpec& spec);

struct ExtendResult {
  DatasetManifest manifest;
  std::vector<std::string> errors;
};

/// Full images plus one cropped PNG per tile written to `out_dir`, tile labels
/// from assign_gt_to_tile. Per-file I/O failures are collected, not thrown.
ExtendResult materialize_extended(const DatasetManifest& m, const std::filesystem::path& images_root,
                                  const std::filesystem::path& out_dir, const TileGridSpec& grid,
                                  double min_visible_ratio);

}  // namespace tiledet
