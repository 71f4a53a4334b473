#include "tiledet/documents.hpp"

#include "tiledet/error.hpp"

namespace tiledet {

using nlohmann::json;

json to_json(const BBox& b) { return {{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}}; }

BBox bbox_from_json(const json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(), j.at("h").get<double>()};
}

json to_json(const TileGridSpec& g) { return {{"cols", g.n_cols}, {"rows", g.n_rows}, {"overlap", g.overlap}}; }

json to_json(const OracleParams& p) {
  return {{"input_size", p.input_size}, {"area_ref", p.area_ref},   {"jitter", p.jitter},
          {"fp_rate", p.fp_rate},       {"score_noise", p.score_noise}, {"num_classes", p.num_classes}};
}

json to_json(const PipelineConfig& cfg) {
  json j;
  j["tiling"] = cfg.tiling_enabled;
  j["grid"] = to_json(cfg.grid);
  j["nms"] = {{"iou_threshold", cfg.nms.iou_threshold}, {"class_aware", cfg.nms.class_aware}};
  j["input_size"] = cfg.input_size;
  j["score_floor"] = cfg.score_floor;
  if (cfg.filter) {
    j["filter"] = {{"bins_per_channel", cfg.filter->hist.bins_per_channel},
                   {"dimension", cfg.filter->weights.size()},
                   {"decision_offset", cfg.filter_offset}};
  } else {
    j["filter"] = nullptr;
  }
  return j;
}

std::string category_name(const std::vector<std::string>& categories, int class_id) {
  if (class_id >= 0 && class_id < static_cast<int>(categories.size())) {
    return categories[static_cast<std::size_t>(class_id)];
  }
  return "class_" + std::to_string(class_id);
}

json detections_document(const std::string& image_id, int width, int height, const PipelineConfig& cfg,
                         const std::vector<Detection>& dets, const std::vector<std::string>& categories) {
  json list = json::array();
  for (const Detection& d : dets) {
    list.push_back({{"class_name", category_name(categories, d.class_id)},
                    {"class_id", d.class_id},
                    {"score", d.score},
                    {"bbox", to_json(d.bbox)}});
  }
  return {{"image_id", image_id},
          {"width", width},
          {"height", height},
          {"config", to_json(cfg)},
          {"detections", std::move(list)}};
}

std::vector<Detection> detections_from_document(const json& doc) {
  try {
    std::vector<Detection> out;
    for (const json& d : doc.at("detections")) {
      out.push_back({bbox_from_json(d.at("bbox")), d.at("class_id").get<int>(), d.at("score").get<double>()});
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("malformed detections document: ") + e.what());
  }
}

}  // namespace tiledet
