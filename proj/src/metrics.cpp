#include "tiledet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "tiledet/error.hpp"

namespace tiledet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t threshold_index(const std::vector<double>& thresholds, double t) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i] - t) < 1e-12) return i;
  }
  return thresholds.size();
}

}  // namespace

MatchResult match(std::span<const Prediction> preds, std::span<const GroundTruthBox> gts, double iou_threshold) {
  MatchResult res;
  res.ranking.resize(preds.size());
  std::iota(res.ranking.begin(), res.ranking.end(), std::size_t{0});
  std::stable_sort(res.ranking.begin(), res.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].det.score > preds[b].det.score; });

  std::unordered_map<std::string, std::vector<std::size_t>> gts_by_image;
  for (std::size_t g = 0; g < gts.size(); ++g) gts_by_image[gts[g].image_id].push_back(g);
  std::vector<bool> taken(gts.size(), false);

  for (std::size_t idx : res.ranking) {
    const Prediction& p = preds[idx];
    long best = -1;
    double best_iou = -1.0;
    if (auto it = gts_by_image.find(p.image_id); it != gts_by_image.end()) {
      for (std::size_t g : it->second) {
        if (taken[g]) continue;
        const double v = iou(p.det.bbox, gts[g].bbox);
        if (v > best_iou) {
          best_iou = v;
          best = static_cast<long>(g);
        }
      }
    }
    const bool tp = best >= 0 && best_iou >= iou_threshold;
    if (tp) taken[static_cast<std::size_t>(best)] = true;
    res.tp_flags.push_back(tp);
    res.matched_gt.push_back(tp ? best : -1);
    if (tp) {
      ++res.counts.tp;
    } else {
      ++res.counts.fp;
    }
  }
  res.counts.fn = gts.size() - res.counts.tp;
  return res;
}

std::vector<PRPoint> pr_curve(const std::vector<bool>& tp_flags, std::size_t total_gt) {
  std::vector<PRPoint> pts;
  pts.reserve(tp_flags.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < tp_flags.size(); ++i) {
    if (tp_flags[i]) ++tp;
    pts.push_back({total_gt == 0 ? 0.0 : double(tp) / double(total_gt), double(tp) / double(i + 1)});
  }
  return pts;
}

double ap_11point(const std::vector<bool>& tp_flags, std::size_t total_gt) {
  if (total_gt == 0) throw Error(ErrorKind::kZeroGroundTruth, "average precision is undefined without ground truth");
  const std::size_t n = tp_flags.size();
  // Cumulative TP count and suffix maximum of precision along the sweep.
  std::vector<std::size_t> tp(n);
  std::vector<double> suffix_max(n + 1, 0.0);
  std::size_t acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tp_flags[i]) ++acc;
    tp[i] = acc;
  }
  for (std::size_t i = n; i-- > 0;) {
    suffix_max[i] = std::max(suffix_max[i + 1], double(tp[i]) / double(i + 1));
  }
  // Recall is non-decreasing along the sweep, so the points with recall >= k/10
  // form a suffix. Recall is compared exactly as tp*10 >= k*total_gt.
  double sum = 0.0;
  std::size_t first = 0;
  for (std::size_t k = 0; k <= 10; ++k) {
    while (first < n && tp[first] * 10 < k * total_gt) ++first;
    sum += suffix_max[first];
  }
  return sum / 11.0;
}

double mean_ap(std::span<const double> aps) {
  if (aps.empty()) return kNaN;
  return std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back((50 + 5 * k) / 100.0);
  return t;
}

double EvalReport::ap50(std::size_t cls) const {
  const std::size_t i = threshold_index(thresholds, 0.5);
  if (i == thresholds.size()) return kNaN;
  return classes.at(cls).ap[i];
}

double EvalReport::ap50_95(std::size_t cls) const {
  return mean_ap(classes.at(cls).ap);
}

EvalReport evaluate(std::span<const Prediction> preds, std::span<const GroundTruthBox> gts,
                    const std::vector<std::string>& categories, const std::vector<double>& iou_thresholds) {
  if (gts.empty()) throw Error(ErrorKind::kZeroGroundTruth, "evaluation needs ground truth");
  if (iou_thresholds.empty()) throw Error(ErrorKind::kInvalidArgument, "no IoU thresholds given");
  for (double t : iou_thresholds) {
    if (!(t > 0.0 && t < 1.0)) throw Error(ErrorKind::kInvalidArgument, "IoU thresholds must lie in (0,1)");
  }
  const int c = static_cast<int>(categories.size());
  std::vector<std::vector<Prediction>> preds_by_class(categories.size());
  std::vector<std::vector<GroundTruthBox>> gts_by_class(categories.size());
  for (const GroundTruthBox& g : gts) {
    if (g.class_id < 0 || g.class_id >= c) {
      throw Error(ErrorKind::kInvalidArgument, "ground truth class " + std::to_string(g.class_id) + " out of range");
    }
    gts_by_class[static_cast<std::size_t>(g.class_id)].push_back(g);
  }
  for (const Prediction& p : preds) {
    if (p.det.class_id < 0 || p.det.class_id >= c) {
      throw Error(ErrorKind::kInvalidArgument, "prediction class " + std::to_string(p.det.class_id) + " out of range");
    }
    preds_by_class[static_cast<std::size_t>(p.det.class_id)].push_back(p);
  }

  EvalReport rep;
  rep.categories = categories;
  rep.thresholds = iou_thresholds;
  for (int k = 0; k < c; ++k) {
    const auto& cp = preds_by_class[static_cast<std::size_t>(k)];
    const auto& cg = gts_by_class[static_cast<std::size_t>(k)];
    ClassResult cr;
    cr.class_id = k;
    cr.name = categories[static_cast<std::size_t>(k)];
    cr.gt_count = cg.size();
    cr.excluded = cg.empty();
    for (double t : iou_thresholds) {
      cr.ap.push_back(cr.excluded ? kNaN : ap_11point(match(cp, cg, t).tp_flags, cg.size()));
    }
    cr.counts50 = match(cp, cg, 0.5).counts;
    rep.counts50.tp += cr.counts50.tp;
    rep.counts50.fp += cr.counts50.fp;
    rep.counts50.fn += cr.counts50.fn;
    rep.classes.push_back(std::move(cr));
  }

  for (std::size_t ti = 0; ti < iou_thresholds.size(); ++ti) {
    std::vector<double> aps;
    for (const ClassResult& cr : rep.classes) {
      if (!cr.excluded) aps.push_back(cr.ap[ti]);
    }
    rep.map_per_threshold.push_back(mean_ap(aps));
  }
  const std::size_t i50 = threshold_index(iou_thresholds, 0.5);
  rep.map50 = i50 == iou_thresholds.size() ? kNaN : rep.map_per_threshold[i50];
  rep.map50_95 = mean_ap(rep.map_per_threshold);
  return rep;
}

std::string report_to_json(const EvalReport& report, int indent) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json classes = json::array();
  for (std::size_t k = 0; k < report.classes.size(); ++k) {
    const ClassResult& cr = report.classes[k];
    json ap = json::array();
    for (double v : cr.ap) ap.push_back(num(v));
    classes.push_back({{"class_id", cr.class_id},
                       {"name", cr.name},
                       {"gt_count", cr.gt_count},
                       {"excluded", cr.excluded},
                       {"ap50_95", num(report.ap50_95(k))},
                       {"ap50", num(report.ap50(k))},
                       {"ap", std::move(ap)},
                       {"tp", cr.counts50.tp},
                       {"fp", cr.counts50.fp},
                       {"fn", cr.counts50.fn}});
  }
  json per_t = json::array();
  for (double v : report.map_per_threshold) per_t.push_back(num(v));
  json j;
  j["categories"] = report.categories;
  j["iou_thresholds"] = report.thresholds;
  j["classes"] = std::move(classes);
  j["all"] = {{"map50_95", num(report.map50_95)},
              {"map50", num(report.map50)},
              {"map_per_threshold", std::move(per_t)},
              {"tp", report.counts50.tp},
              {"fp", report.counts50.fp},
              {"fn", report.counts50.fn},
              {"precision50", report.counts50.precision()},
              {"recall50", report.counts50.recall()}};
  return j.dump(indent) + "\n";
}

std::string render_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  if (rows.empty()) return {};
  auto pct = [](double v) {
    if (!std::isfinite(v)) return std::string("   -  ");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.1f", 100.0 * v);
    return std::string(buf);
  };
  std::size_t name_w = 5;
  for (const auto& [name, rep] : rows) name_w = std::max(name_w, name.size());
  const auto& cats = rows.front().second.categories;

  std::string out = "mAP (%)\n";
  std::string head1(name_w, ' ');
  std::string head2 = "Model" + std::string(name_w - 5, ' ');
  auto add_group = [&](const std::string& title) {
    std::string t = title.substr(0, 15);
    head1 += " | " + t + std::string(15 - t.size(), ' ');
    head2 += " | 0.5:0.95    0.5";
  };
  for (const auto& c : cats) add_group(c);
  add_group("All");
  out += head1 + "\n" + head2 + "\n";
  out += std::string(head2.size(), '-') + "\n";
  for (const auto& [name, rep] : rows) {
    std::string line = name + std::string(name_w - name.size(), ' ');
    for (std::size_t k = 0; k < rep.classes.size(); ++k) {
      line += " |   " + pct(rep.ap50_95(k)) + " " + pct(rep.ap50(k));
    }
    line += " |   " + pct(rep.map50_95) + " " + pct(rep.map50);
    out += line + "\n";
  }
  return out;
}

}  // namespace tiledet
