#pragma once

#include <span>
#include <string>
#include <vector>

namespace tiledet {

/// Axis-aligned box with a top-left origin, in continuous pixel coordinates.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Detection {
  BBox bbox;
  int class_id = 0;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Annotated object. `image_id` ties it to an image record.
struct GroundTruthBox {
  BBox bbox;
  int class_id = 0;
  std::string image_id;

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

struct NmsConfig {
  double iou_threshold = 0.45;
  bool class_aware = true;
};

double intersection_area(const BBox& a, const BBox& b);

/// Intersection over union. Two zero-area boxes give 0.
double iou(const BBox& a, const BBox& b);

/// Intersection of `b` with [0,width]x[0,height]. A disjoint box collapses to
/// zero area at the nearest boundary.
BBox clip_to(const BBox& b, double width, double height);

/// Greedy non-maximum suppression. Candidates are visited by descending score
/// (ties: lower class id, then input order) and a candidate is discarded when
/// its IoU with an already kept box exceeds the threshold. The result is in
/// visiting order.
std::vector<Detection> nms(std::span<const Detection> dets, const NmsConfig& cfg);

void validate(const NmsConfig& cfg);

}  // namespace tiledet
