#include "tiledet/tile_filter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "tiledet/error.hpp"
#include "tiledet/random.hpp"

namespace tiledet {

using nlohmann::json;

namespace {

constexpr const char* kModelFormat = "tiledet-linear-svm";
constexpr const char* kSamplesFormat = "tiledet-filter-samples";
constexpr int kFormatVersion = 1;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_dimension(const LinearSvmModel& model, std::size_t dim) {
  if (dim != model.weights.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "feature has " + std::to_string(dim) + " entries, model expects " +
                                                   std::to_string(model.weights.size()));
  }
}

json hist_to_json(const HistogramConfig& h) {
  return {{"bins_per_channel", h.bins_per_channel}, {"channels", "rgb"}, {"normalization", "l1_per_channel"}};
}

HistogramConfig hist_from_json(const json& j) {
  if (j.at("channels").get<std::string>() != "rgb" || j.at("normalization").get<std::string>() != "l1_per_channel") {
    throw Error(ErrorKind::kFormat, "unsupported histogram channels or normalization");
  }
  HistogramConfig h{j.at("bins_per_channel").get<int>()};
  validate(h);
  return h;
}

json sample_to_json(const FilterSample& s) {
  return {{"image_id", s.image_id}, {"col", s.col}, {"row", s.row}, {"label", s.positive ? 1 : 0},
          {"feature", s.feature}};
}

FilterSample sample_from_json(const json& j, int dim) {
  FilterSample s;
  s.image_id = j.at("image_id").get<std::string>();
  s.col = j.at("col").get<int>();
  s.row = j.at("row").get<int>();
  s.positive = j.at("label").get<int>() != 0;
  s.feature = j.at("feature").get<std::vector<double>>();
  if (static_cast<int>(s.feature.size()) != dim) {
    throw Error(ErrorKind::kDimensionMismatch, "sample feature dimension " + std::to_string(s.feature.size()) +
                                                   " does not match histogram dimension " + std::to_string(dim));
  }
  return s;
}

std::vector<FilterSample> tile_samples(const AnnotatedImage& img, const FilterDatasetOptions& opts) {
  std::vector<FilterSample> out;
  for (const Tile& tile : plan_tiles(img.raster.width(), img.raster.height(), opts.grid)) {
    FilterSample s;
    s.positive = !assign_gt_to_tile(tile, img.gts, opts.min_visible_ratio).empty();
    if (!s.positive && opts.drop_partial_negatives) {
      const BBox tb = tile.bbox();
      const bool touched = std::any_of(img.gts.begin(), img.gts.end(),
                                       [&](const GroundTruthBox& g) { return intersection_area(g.bbox, tb) > 0.0; });
      if (touched) continue;
    }
    s.feature = histogram_feature(crop_tile(img.raster, tile), opts.hist);
    s.image_id = img.id;
    s.col = tile.col;
    s.row = tile.row;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

void validate(const HistogramConfig& cfg) {
  if (cfg.bins_per_channel < 2 || cfg.bins_per_channel > 256) {
    throw Error(ErrorKind::kInvalidArgument,
                "bins_per_channel must lie in [2,256], got " + std::to_string(cfg.bins_per_channel));
  }
}

std::vector<double> histogram_feature(const Image& tile, const HistogramConfig& cfg) {
  validate(cfg);
  if (tile.empty()) throw Error(ErrorKind::kInvalidDimensions, "histogram of an empty raster");
  const int bins = cfg.bins_per_channel;
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(3 * bins), 0);
  const auto px = tile.bytes();
  for (std::size_t i = 0; i < px.size(); i += 3) {
    for (int c = 0; c < 3; ++c) {
      const int bin = std::min(px[i + c] * bins / 256, bins - 1);
      ++counts[static_cast<std::size_t>(c * bins + bin)];
    }
  }
  const double n = static_cast<double>(tile.pixel_count());
  std::vector<double> feature(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) feature[i] = static_cast<double>(counts[i]) / n;
  return feature;
}

std::vector<FilterSample> balance_samples(std::vector<FilterSample> samples, std::uint64_t seed) {
  std::vector<std::size_t> negatives;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].positive) {
      ++positives;
    } else {
      negatives.push_back(i);
    }
  }
  if (positives == 0) throw Error(ErrorKind::kNoPositives, "no tile contains a target box");
  if (negatives.size() < positives) {
    throw Error(ErrorKind::kInvalidArgument, "only " + std::to_string(negatives.size()) +
                                                 " background tiles for " + std::to_string(positives) +
                                                 " target tiles; cannot balance 1:1");
  }
  Rng rng(seed);
  rng.shuffle(negatives);
  negatives.resize(positives);
  std::vector<bool> keep(samples.size(), false);
  for (std::size_t i = 0; i < samples.size(); ++i) keep[i] = samples[i].positive;
  for (std::size_t i : negatives) keep[i] = true;

  std::vector<FilterSample> out;
  out.reserve(2 * positives);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (keep[i]) out.push_back(std::move(samples[i]));
  }
  return out;
}

FilterDataset build_filter_dataset(std::size_t image_count, const AnnotatedImageLoader& load,
                                   const FilterDatasetOptions& opts) {
  validate(opts.grid);
  validate(opts.hist);
  if (image_count == 0) throw Error(ErrorKind::kInvalidArgument, "filter dataset needs at least one image");
  if (!(opts.holdout_fraction >= 0.0 && opts.holdout_fraction < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "holdout fraction must lie in [0,1)");
  }

  std::vector<std::size_t> order(image_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(opts.seed, "holdout"));
  split_rng.shuffle(order);
  const auto n_holdout = static_cast<std::size_t>(std::floor(image_count * opts.holdout_fraction + 1e-9));
  std::vector<bool> held(image_count, false);
  for (std::size_t k = 0; k < n_holdout; ++k) held[order[k]] = true;

  std::vector<FilterSample> train;
  std::vector<FilterSample> held_out;
  for (std::size_t i = 0; i < image_count; ++i) {
    auto samples = tile_samples(load(i), opts);
    auto& dst = held[i] ? held_out : train;
    std::move(samples.begin(), samples.end(), std::back_inserter(dst));
  }

  FilterDataset ds;
  ds.hist = opts.hist;
  ds.train = balance_samples(std::move(train), derive_seed(opts.seed, "train"));
  if (!held_out.empty()) ds.held_out = balance_samples(std::move(held_out), derive_seed(opts.seed, "held_out"));
  return ds;
}

double svm_objective(const LinearSvmModel& model, std::span<const FilterSample> samples, double lambda) {
  double hinge = 0.0;
  for (const FilterSample& s : samples) {
    const double y = s.positive ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - y * (dot(model.weights, s.feature) + model.bias));
  }
  const double reg = 0.5 * lambda * dot(model.weights, model.weights);
  return reg + (samples.empty() ? 0.0 : hinge / static_cast<double>(samples.size()));
}

SvmTrainResult svm_train(std::span<const FilterSample> samples, const SvmTrainConfig& cfg,
                         const HistogramConfig& hist) {
  if (samples.empty()) throw Error(ErrorKind::kSingleClass, "no training samples");
  if (!(cfg.lambda > 0.0) || cfg.epochs < 1) {
    throw Error(ErrorKind::kInvalidArgument, "svm training needs lambda > 0 and epochs >= 1");
  }
  const std::size_t dim = samples.front().feature.size();
  bool has_pos = false;
  bool has_neg = false;
  for (const FilterSample& s : samples) {
    if (s.feature.size() != dim) {
      throw Error(ErrorKind::kDimensionMismatch, "training features differ in dimension");
    }
    (s.positive ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw Error(ErrorKind::kSingleClass, "svm training needs both labels");

  LinearSvmModel model;
  model.weights.assign(dim, 0.0);
  model.hist = hist;
  model.training = cfg;
  model.training_samples = samples.size();

  SvmTrainResult result;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  std::vector<double> avg_w(dim);
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    std::fill(avg_w.begin(), avg_w.end(), 0.0);
    double avg_b = 0.0;
    for (std::size_t idx : order) {
      ++t;
      const FilterSample& s = samples[idx];
      const double y = s.positive ? 1.0 : -1.0;
      const double eta = 1.0 / (cfg.lambda * static_cast<double>(t));
      const double margin = y * (dot(model.weights, s.feature) + model.bias);
      const double shrink = 1.0 - eta * cfg.lambda;
      for (double& w : model.weights) w *= shrink;
      if (margin < 1.0) {
        for (std::size_t k = 0; k < dim; ++k) model.weights[k] += eta * y * s.feature[k];
        model.bias += eta * y;
      }
      for (std::size_t k = 0; k < dim; ++k) avg_w[k] += model.weights[k];
      avg_b += model.bias;
    }
    LinearSvmModel avg = model;
    const double n = static_cast<double>(samples.size());
    for (std::size_t k = 0; k < dim; ++k) avg.weights[k] = avg_w[k] / n;
    avg.bias = avg_b / n;
    result.epoch_objective.push_back(svm_objective(avg, samples, cfg.lambda));
  }

  std::size_t correct = 0;
  for (const FilterSample& s : samples) {
    if (svm_predict(model, s.feature).positive == s.positive) ++correct;
  }
  model.training_accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  result.training_accuracy = model.training_accuracy;
  result.model = std::move(model);
  return result;
}

SvmPrediction svm_predict(const LinearSvmModel& model, std::span<const double> feature, double decision_offset) {
  check_dimension(model, feature.size());
  const double score = dot(model.weights, feature) + model.bias;
  return {score + decision_offset >= 0.0, score};
}

FilterEval filter_eval(const LinearSvmModel& model, std::span<const FilterSample> held_out, double decision_offset) {
  if (held_out.empty()) throw Error(ErrorKind::kInvalidArgument, "filter evaluation needs samples");
  FilterEval ev;
  for (const FilterSample& s : held_out) {
    const bool pred = svm_predict(model, s.feature, decision_offset).positive;
    if (pred && s.positive) ++ev.tp;
    if (pred && !s.positive) ++ev.fp;
    if (!pred && !s.positive) ++ev.tn;
    if (!pred && s.positive) ++ev.fn;
  }
  const double n = static_cast<double>(held_out.size());
  ev.accuracy = static_cast<double>(ev.tp + ev.tn) / n;
  ev.precision = ev.tp + ev.fp == 0 ? 0.0 : static_cast<double>(ev.tp) / static_cast<double>(ev.tp + ev.fp);
  ev.recall = ev.tp + ev.fn == 0 ? 0.0 : static_cast<double>(ev.tp) / static_cast<double>(ev.tp + ev.fn);
  return ev;
}

std::string model_to_string(const LinearSvmModel& model) {
  json j;
  j["format"] = kModelFormat;
  j["version"] = kFormatVersion;
  j["histogram"] = hist_to_json(model.hist);
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["training"] = {{"lambda", model.training.lambda},
                   {"epochs", model.training.epochs},
                   {"seed", model.training.seed},
                   {"samples", model.training_samples},
                   {"accuracy", model.training_accuracy}};
  return j.dump(2) + "\n";
}

LinearSvmModel model_from_string(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kModelFormat) throw Error(ErrorKind::kFormat, "not an svm model file");
    if (j.at("version").get<int>() != kFormatVersion) {
      throw Error(ErrorKind::kFormat, "unsupported model version " + j.at("version").dump());
    }
    LinearSvmModel m;
    m.hist = hist_from_json(j.at("histogram"));
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    const json& tr = j.at("training");
    m.training.lambda = tr.at("lambda").get<double>();
    m.training.epochs = tr.at("epochs").get<int>();
    m.training.seed = tr.at("seed").get<std::uint64_t>();
    m.training_samples = tr.at("samples").get<std::size_t>();
    m.training_accuracy = tr.at("accuracy").get<double>();
    if (static_cast<int>(m.weights.size()) != m.hist.dimension()) {
      throw Error(ErrorKind::kFormat, "model has " + std::to_string(m.weights.size()) + " weights but histogram of " +
                                          std::to_string(m.hist.bins_per_channel) + " bins needs " +
                                          std::to_string(m.hist.dimension()));
    }
    for (double w : m.weights) {
      if (!std::isfinite(w)) throw Error(ErrorKind::kFormat, "non-finite model weight");
    }
    if (!std::isfinite(m.bias)) throw Error(ErrorKind::kFormat, "non-finite model bias");
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const LinearSvmModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << model_to_string(model);
}

LinearSvmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kNotFound, "cannot open model " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_string(ss.str());
}

std::string samples_to_string(const FilterDataset& ds) {
  json j;
  j["format"] = kSamplesFormat;
  j["version"] = kFormatVersion;
  j["histogram"] = hist_to_json(ds.hist);
  j["train"] = json::array();
  for (const auto& s : ds.train) j["train"].push_back(sample_to_json(s));
  j["held_out"] = json::array();
  for (const auto& s : ds.held_out) j["held_out"].push_back(sample_to_json(s));
  return j.dump() + "\n";
}

FilterDataset samples_from_string(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kSamplesFormat) {
      throw Error(ErrorKind::kFormat, "not a filter samples file");
    }
    FilterDataset ds;
    ds.hist = hist_from_json(j.at("histogram"));
    for (const auto& s : j.at("train")) ds.train.push_back(sample_from_json(s, ds.hist.dimension()));
    for (const auto& s : j.at("held_out")) ds.held_out.push_back(sample_from_json(s, ds.hist.dimension()));
    return ds;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("malformed samples file: ") + e.what());
  }
}

}  // namespace tiledet
