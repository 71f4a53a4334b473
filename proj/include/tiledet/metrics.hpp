#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tiledet/geometry.hpp"

namespace tiledet {

/// A detection attributed to an image, as fed to the evaluator.
struct Prediction {
  std::string image_id;
  Detection det;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct MatchResult {
  /// Indices into the prediction list, by descending score (ties: input order).
  std::vector<std::size_t> ranking;
  /// True-positive flag per ranked prediction.
  std::vector<bool> tp_flags;
  /// For each ranked prediction, the matched ground-truth index or -1.
  std::vector<long> matched_gt;
  ConfusionCounts counts;
};

/// Greedy single-assignment matching of one class. Each prediction, in rank
/// order, takes the unmatched same-image ground truth of highest IoU when that
/// IoU reaches the threshold. Class ids are not inspected; callers filter.
MatchResult match(std::span<const Prediction> preds, std::span<const GroundTruthBox> gts, double iou_threshold);

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
};

/// One point per ranked prediction.
std::vector<PRPoint> pr_curve(const std::vector<bool>& tp_flags, std::size_t total_gt);

/// 11-point interpolated AP: mean over r in {0, 0.1, ..., 1} of the highest
/// precision reached at any recall >= r (0 when recall r is never reached).
/// Throws kZeroGroundTruth when total_gt is 0.
double ap_11point(const std::vector<bool>& tp_flags, std::size_t total_gt);

/// Arithmetic mean of per-class APs.
double mean_ap(std::span<const double> aps);

/// {0.50, 0.55, ..., 0.95}.
std::vector<double> coco_iou_thresholds();

struct ClassResult {
  int class_id = 0;
  std::string name;
  std::size_t gt_count = 0;
  /// AP at each evaluated IoU threshold.
  std::vector<double> ap;
  ConfusionCounts counts50;
  /// No ground truth in the evaluated set; left out of every mean.
  bool excluded = false;
};

struct EvalReport {
  std::vector<std::string> categories;
  std::vector<double> thresholds;
  std::vector<ClassResult> classes;
  /// Mean over non-excluded classes, per threshold.
  std::vector<double> map_per_threshold;
  /// mAP at IoU 0.5 (NaN when 0.5 is not among the thresholds).
  double map50 = 0.0;
  /// Mean of map_per_threshold.
  double map50_95 = 0.0;
  ConfusionCounts counts50;

  double ap50(std::size_t cls) const;
  double ap50_95(std::size_t cls) const;
};

/// Throws kZeroGroundTruth when `gts` is empty and kInvalidArgument on an
/// empty or out-of-range threshold list.
EvalReport evaluate(std::span<const Prediction> preds, std::span<const GroundTruthBox> gts,
                    const std::vector<std::string>& categories,
                    const std::vector<double>& iou_thresholds = coco_iou_thresholds());

std::string report_to_json(const EvalReport& report, int indent = 2);

/// Per-class and all-class mAP at 0.5:0.95 and 0.5, one row per named report,
/// values in percent.
std::string render_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace tiledet
