#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tiledet/geometry.hpp"
#include "tiledet/image.hpp"
#include "tiledet/tiling.hpp"

namespace tiledet {

/// RGB colour histogram, each channel L1-normalised, concatenated R, G, B.
struct HistogramConfig {
  int bins_per_channel = 32;

  int dimension() const { return 3 * bins_per_channel; }
  friend bool operator==(const HistogramConfig&, const HistogramConfig&) = default;
};

void validate(const HistogramConfig& cfg);

std::vector<double> histogram_feature(const Image& tile, const HistogramConfig& cfg);

struct FilterSample {
  std::vector<double> feature;
  bool positive = false;
  /// Provenance, for inspection only.
  std::string image_id;
  int col = 0;
  int row = 0;

  friend bool operator==(const FilterSample&, const FilterSample&) = default;
};

struct FilterDataset {
  HistogramConfig hist;
  std::vector<FilterSample> train;
  std::vector<FilterSample> held_out;
};

struct AnnotatedImage {
  std::string id;
  Image raster;
  std::vector<GroundTruthBox> gts;
};

/// Loads the i-th annotated image; called once per image, in index order.
using AnnotatedImageLoader = std::function<AnnotatedImage(std::size_t)>;

struct FilterDatasetOptions {
  TileGridSpec grid;
  double min_visible_ratio = 0.5;
  HistogramConfig hist;
  /// Fraction of images (not tiles) whose tiles go to the held-out set.
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
  /// Skip tiles that overlap an object without receiving it, so negatives are
  /// background only.
  bool drop_partial_negatives = false;
};

/// Tiles every image, labels a tile positive when it receives ground truth,
/// and balances each part 1:1 by drawing negatives without replacement.
FilterDataset build_filter_dataset(std::size_t image_count, const AnnotatedImageLoader& load,
                                   const FilterDatasetOptions& opts);

/// Keeps every positive and a seeded uniform subset of negatives of the same
/// size. Output keeps the input order. Throws kNoPositives when there are no
/// positives and kInvalidArgument when negatives are too few.
std::vector<FilterSample> balance_samples(std::vector<FilterSample> samples, std::uint64_t seed);

struct SvmTrainConfig {
  double lambda = 1e-4;
  int epochs = 100;
  std::uint64_t seed = 0;

  friend bool operator==(const SvmTrainConfig&, const SvmTrainConfig&) = default;
};

struct LinearSvmModel {
  std::vector<double> weights;
  double bias = 0.0;
  HistogramConfig hist;
  SvmTrainConfig training;
  std::size_t training_samples = 0;
  double training_accuracy = 0.0;

  friend bool operator==(const LinearSvmModel&, const LinearSvmModel&) = default;
};

struct SvmTrainResult {
  LinearSvmModel model;
  double training_accuracy = 0.0;
  /// Regularised hinge objective at the average of each epoch's iterates.
  std::vector<double> epoch_objective;
};

/// L2-regularised hinge loss, (lambda/2)|w|^2 + mean(max(0, 1 - y(w.x + b))),
/// minimised by seeded epoch-shuffled subgradient steps of size 1/(lambda t).
SvmTrainResult svm_train(std::span<const FilterSample> samples, const SvmTrainConfig& cfg,
                         const HistogramConfig& hist = {});

double svm_objective(const LinearSvmModel& model, std::span<const FilterSample> samples, double lambda);

struct SvmPrediction {
  bool positive = false;
  double score = 0.0;
};

/// score = w.x + b; positive iff score + decision_offset >= 0.
SvmPrediction svm_predict(const LinearSvmModel& model, std::span<const double> feature,
                          double decision_offset = 0.0);

struct FilterEval {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

FilterEval filter_eval(const LinearSvmModel& model, std::span<const FilterSample> held_out,
                       double decision_offset = 0.0);

std::string model_to_string(const LinearSvmModel& model);
LinearSvmModel model_from_string(const std::string& text);
void save_model(const LinearSvmModel& model, const std::filesystem::path& path);
LinearSvmModel load_model(const std::filesystem::path& path);

std::string samples_to_string(const FilterDataset& ds);
FilterDataset samples_from_string(const std::string& text);

}  // namespace tiledet
