#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tiledet/detector.hpp"
#include "tiledet/pipeline.hpp"

namespace tiledet {

nlohmann::json to_json(const BBox& b);
BBox bbox_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TileGridSpec& g);
nlohmann::json to_json(const OracleParams& p);

/// Snapshot of a pipeline configuration. The filter is summarised by its
/// presence, dimension and decision offset.
nlohmann::json to_json(const PipelineConfig& cfg);

/// Detections document shared by the CLI and the service:
/// {image_id, width, height, config, detections: [{class_name, class_id, score, bbox{x,y,w,h}}]}.
nlohmann::json detections_document(const std::string& image_id, int width, int height, const PipelineConfig& cfg,
                                   const std::vector<Detection>& dets, const std::vector<std::string>& categories);

/// Reads the detections list back from a detections document.
std::vector<Detection> detections_from_document(const nlohmann::json& doc);

std::string category_name(const std::vector<std::string>& categories, int class_id);

}  // namespace tiledet
