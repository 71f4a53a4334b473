// tiledet: command line entry points for the tiled small-object detection
// pipeline. Every command that writes outputs also writes a run manifest.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tiledet/data_io.hpp"
#include "tiledet/detector.hpp"
#include "tiledet/documents.hpp"
#include "tiledet/error.hpp"
#include "tiledet/metrics.hpp"
#include "tiledet/pipeline.hpp"
#include "tiledet/service.hpp"
#include "tiledet/synth.hpp"
#include "tiledet/tile_filter.hpp"
#include "tiledet/tiling.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tiledet;

namespace {

constexpr const char* kToolVersion = "tiledet 1.0.0";

/// Thrown for invalid flag combinations detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kNotFound, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

TileGridSpec parse_grid(const std::string& v, double overlap) {
  int cols = 0;
  int rows = 0;
  char sep = 0;
  std::istringstream in(v);
  if (!(in >> cols >> sep >> rows) || (sep != 'x' && sep != 'X') || !in.eof()) {
    throw UsageError("--grid must look like 5x5, got '" + v + "'");
  }
  return {cols, rows, overlap};
}

bool parse_on_off(const std::string& flag, const std::string& v) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw UsageError(flag + " must be 'on' or 'off', got '" + v + "'");
}

/// Records one invocation: command, every option value, seed, paths, timing.
class RunManifest {
 public:
  RunManifest(std::string command, const CLI::App& app) : command_(std::move(command)) {
    config_ = app.config_to_str(true, false);
    started_ = std::chrono::steady_clock::now();
    started_utc_ = utc_now();
  }
  void input(const std::string& p) { inputs_.push_back(p); }
  void output(const std::string& p) { outputs_.push_back(p); }
  void seed(std::uint64_t s) { seed_ = s; }

  void write(const fs::path& path) const {
    json j;
    j["command"] = command_;
    j["config"] = config_;
    j["seed"] = seed_ ? json(*seed_) : json(nullptr);
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["timing"] = {{"started_utc", started_utc_},
                   {"elapsed_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count()}};
    j["tool_version"] = kToolVersion;
    write_text(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::string config_;
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point started_;
  std::string started_utc_;
};

fs::path manifest_path_for(const fs::path& output) { return fs::path(output.string() + ".run.json"); }

// Shared option groups -------------------------------------------------------

struct PipelineFlags {
  std::string tiling = "on";
  std::string grid = "5x5";
  double overlap = 0.5;
  double nms = 0.45;
  bool class_agnostic = false;
  int input_size = 640;
  double score_floor = 0.01;
  std::string filter_path;
  double filter_offset = 0.0;

  void add(CLI::App* app, bool with_tiling = true) {
    if (with_tiling) app->add_option("--tiling", tiling, "Tile pass on|off")->capture_default_str();
    app->add_option("--grid", grid, "Tile grid COLSxROWS")->capture_default_str();
    app->add_option("--overlap", overlap, "Overlap of consecutive tiles")->capture_default_str();
    app->add_option("--nms", nms, "NMS IoU threshold")->capture_default_str();
    app->add_flag("--class-agnostic-nms", class_agnostic, "Suppress across classes")->capture_default_str();
    app->add_option("--input-size", input_size, "Detector input side in pixels")->capture_default_str();
    app->add_option("--score-floor", score_floor, "Minimum score kept before NMS")->capture_default_str();
    app->add_option("--filter", filter_path, "Tile filter model file")->check(CLI::ExistingFile);
    app->add_option("--filter-offset", filter_offset, "Added to the filter margin before thresholding")
        ->capture_default_str();
  }

  PipelineConfig build() const {
    PipelineConfig cfg;
    cfg.tiling_enabled = parse_on_off("--tiling", tiling);
    cfg.grid = parse_grid(grid, overlap);
    cfg.nms.iou_threshold = nms;
    cfg.nms.class_aware = !class_agnostic;
    cfg.input_size = input_size;
    cfg.score_floor = score_floor;
    if (!filter_path.empty()) cfg.filter = std::make_shared<const LinearSvmModel>(load_model(filter_path));
    cfg.filter_offset = filter_offset;
    validate(cfg.grid);
    validate(cfg);
    return cfg;
  }
};

struct DetectorFlags {
  std::string kind = "oracle";
  std::string gt_path;
  std::string replay_path;
  OracleParams oracle;
  double min_visible = 0.5;

  void add(CLI::App* app) {
    app->add_option("--detector", kind, "Detection back-end: oracle|replay")
        ->check(CLI::IsMember({"oracle", "replay"}))
        ->capture_default_str();
    app->add_option("--gt", gt_path, "COCO manifest giving the oracle its ground truth")->check(CLI::ExistingFile);
    app->add_option("--replay", replay_path, "Replay store file")->check(CLI::ExistingFile);
    app->add_option("--area-ref", oracle.area_ref, "Oracle reference area (px^2)")->capture_default_str();
    app->add_option("--jitter", oracle.jitter, "Oracle box jitter (fraction of box side)")->capture_default_str();
    app->add_option("--fp-rate", oracle.fp_rate, "Oracle false positives per view")->capture_default_str();
    app->add_option("--score-noise", oracle.score_noise, "Oracle score noise std")->capture_default_str();
    app->add_option("--oracle-min-visible", min_visible, "Visible fraction for a tile to see an object")
        ->capture_default_str();
  }

  /// `manifest` supplies ground truth when --gt is not given.
  std::shared_ptr<const Detector> build(const DatasetManifest* manifest, std::vector<std::string>* categories) const {
    if (kind == "replay") {
      if (replay_path.empty()) throw UsageError("--detector replay needs --replay");
      return std::make_shared<ReplayDetector>(load_replay_store(replay_path));
    }
    DatasetManifest gt_manifest;
    if (!gt_path.empty()) {
      gt_manifest = load_coco(gt_path);
      manifest = &gt_manifest;
    }
    OracleParams p = oracle;
    std::vector<GroundTruthBox> gts;
    if (manifest) {
      gts = manifest->ground_truth();
      p.num_classes = std::max<int>(1, static_cast<int>(manifest->categories.size()));
      if (categories && categories->empty()) *categories = manifest->categories;
    }
    return std::make_shared<OracleDetector>(gts, p, min_visible);
  }
};

// Commands --------------------------------------------------------------------

struct SynthCmd {
  SynthConfig cfg;
  std::string out;
  int threads = 1;

  void add(CLI::App* parent) {
    auto* app = parent->add_subcommand("gen", "Generate the seeded synthetic small-object dataset");
    app->add_option("--out", out, "Output directory")->required();
    app->add_option("--count", cfg.image_count, "Number of images")->capture_default_str();
    app->add_option("--width", cfg.width, "Image width")->capture_default_str();
    app->add_option("--height", cfg.height, "Image height")->capture_default_str();
    app->add_option("--min-objects", cfg.min_objects, "Objects per image, lower bound")->capture_default_str();
    app->add_option("--max-objects", cfg.max_objects, "Objects per image, upper bound")->capture_default_str();
    app->add_option("--min-size", cfg.min_object_size, "Object side, lower bound (px)")->capture_default_str();
    app->add_option("--max-size", cfg.max_object_size, "Object side, upper bound (px)")->capture_default_str();
    app->add_option("--classes", cfg.num_classes, "Number of classes")->capture_default_str();
    app->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    app->add_option("--threads", threads, "Worker threads")->capture_default_str();
    app->callback([this, app] {
      RunManifest run("synth gen", *app);
      run.seed(cfg.seed);
      const auto m = synth_gen(cfg, out, threads);
      run.output(out);
      run.write(fs::path(out) / "run_manifest.json");
      std::cout << "wrote " << m.images.size() << " images, " << m.annotations.size() << " objects to " << out
                << "\n";
    });
  }
};

struct TilesCmd {
  int width = 0;
  int height = 0;
  std::string grid = "5x5";
  double overlap = 0.5;
  std::string out;

  void add(CLI::App* parent) {
    auto* app = parent->add_subcommand("plan", "Print the tile plan of an image size");
    app->add_option("--width", width, "Image width")->required();
    app->add_option("--height", height, "Image height")->required();
    app->add_option("--grid", grid, "Tile grid COLSxROWS")->capture_default_str();
    app->add_option("--overlap", overlap, "Overlap of consecutive tiles")->capture_default_str();
    app->add_option("--out", out, "Also write the plan as JSON");
    app->callback([this, app] {
      const auto tiles = plan_tiles(width, height, parse_grid(grid, overlap));
      std::cout << "col row x y w h\n";
      json list = json::array();
      for (const Tile& t : tiles) {
        std::cout << t.col << " " << t.row << " " << t.origin_x << " " << t.origin_y << " " << t.width << " "
                  << t.height << "\n";
        list.push_back({{"col", t.col}, {"row", t.row}, {"x", t.origin_x}, {"y", t.origin_y}, {"w", t.width},
                        {"h", t.height}});
      }
      if (!out.empty()) {
        RunManifest run("tiles plan", *app);
        write_text(out, json{{"width", width}, {"height", height}, {"tiles", list}}.dump(2) + "\n");
        run.output(out);
        run.write(manifest_path_for(out));
      }
    });
  }
};

struct DatasetCmds {
  // split
  std::string split_manifest, split_out, ratios = "0.6,0.2,0.2";
  std::uint64_t split_seed = 0;
  // convert
  std::string to, conv_manifest, conv_images, conv_labels, conv_out, categories;
  // extend
  std::string ext_manifest, ext_images, ext_out, ext_grid = "5x5";
  double ext_overlap = 0.5, ext_min_visible = 0.5;

  void add(CLI::App* parent) {
    auto* sp = parent->add_subcommand("split", "Seeded image-level train/val/test split");
    sp->add_option("--manifest", split_manifest, "COCO manifest")->required()->check(CLI::ExistingFile);
    sp->add_option("--out-dir", split_out, "Directory for train.json, val.json, test.json")->required();
    sp->add_option("--ratios", ratios, "train,val,test ratios")->capture_default_str();
    sp->add_option("--seed", split_seed, "Random seed")->capture_default_str();
    sp->callback([this, sp] {
      RunManifest run("dataset split", *sp);
      run.seed(split_seed);
      run.input(split_manifest);
      const auto r = split_list(ratios);
      if (r.size() != 3) throw UsageError("--ratios needs three comma-separated values");
      SplitSpec spec{std::stod(r[0]), std::stod(r[1]), std::stod(r[2]), split_seed};
      try {
        validate(spec);
      } catch (const Error& e) {
        throw UsageError(std::string("--ratios: ") + e.what());
      }
      const auto parts = split(load_coco(split_manifest), spec);
      fs::create_directories(split_out);
      save_coco(parts.train, fs::path(split_out) / "train.json");
      save_coco(parts.val, fs::path(split_out) / "val.json");
      save_coco(parts.test, fs::path(split_out) / "test.json");
      run.output(split_out);
      run.write(fs::path(split_out) / "run_manifest.json");
      std::cout << "train " << parts.train.images.size() << " / val " << parts.val.images.size() << " / test "
                << parts.test.images.size() << " images\n";
    });

    auto* cv = parent->add_subcommand("convert", "Convert between COCO manifests and YOLO label directories");
    cv->add_option("--to", to, "Target format: yolo|coco")->required()->check(CLI::IsMember({"yolo", "coco"}));
    cv->add_option("--manifest", conv_manifest, "COCO manifest (for --to yolo)");
    cv->add_option("--images-dir", conv_images, "Image directory (for --to coco); output file names are relative to it");
    cv->add_option("--labels-dir", conv_labels, "YOLO labels directory (for --to coco)");
    cv->add_option("--categories", categories, "Comma-separated class names (for --to coco)");
    cv->add_option("--out", conv_out, "Output directory (yolo) or manifest file (coco)")->required();
    cv->callback([this, cv] {
      RunManifest run("dataset convert", *cv);
      if (to == "yolo") {
        if (conv_manifest.empty()) throw UsageError("--to yolo needs --manifest");
        run.input(conv_manifest);
        write_yolo_dir(load_coco(conv_manifest), conv_out);
        run.output(conv_out);
        run.write(fs::path(conv_out) / "run_manifest.json");
      } else {
        if (conv_images.empty() || conv_labels.empty()) throw UsageError("--to coco needs --images-dir and --labels-dir");
        run.input(conv_images);
        run.input(conv_labels);
        auto names = categories.empty() ? default_categories() : split_list(categories);
        save_coco(read_yolo_dir(conv_images, conv_labels, names), conv_out);
        run.output(conv_out);
        run.write(manifest_path_for(conv_out));
      }
      std::cout << "wrote " << conv_out << "\n";
    });

    auto* ex = parent->add_subcommand("extend", "Materialise full images plus tile crops with remapped labels");
    ex->add_option("--manifest", ext_manifest, "COCO manifest")->required()->check(CLI::ExistingFile);
    ex->add_option("--images-dir", ext_images, "Root of the manifest file names (default: the manifest directory)");
    ex->add_option("--out-dir", ext_out, "Output directory")->required();
    ex->add_option("--grid", ext_grid, "Tile grid COLSxROWS")->capture_default_str();
    ex->add_option("--overlap", ext_overlap, "Overlap of consecutive tiles")->capture_default_str();
    ex->add_option("--min-visible", ext_min_visible, "Visible fraction needed to label a tile")
        ->capture_default_str();
    ex->callback([this, ex] {
      RunManifest run("dataset extend", *ex);
      run.input(ext_manifest);
      const fs::path root = ext_images.empty() ? fs::path(ext_manifest).parent_path() : fs::path(ext_images);
      const auto res = materialize_extended(load_coco(ext_manifest), root, ext_out,
                                            parse_grid(ext_grid, ext_overlap), ext_min_visible);
      save_coco(res.manifest, fs::path(ext_out) / "manifest.json");
      run.output(ext_out);
      run.write(fs::path(ext_out) / "run_manifest.json");
      for (const auto& e : res.errors) std::cerr << "error: " << e << "\n";
      std::cout << "wrote " << res.manifest.images.size() << " image records\n";
      if (!res.errors.empty()) throw Error(ErrorKind::kIo, std::to_string(res.errors.size()) + " files failed");
    });
  }
};

struct FilterCmds {
  // build-dataset
  std::string bd_manifest, bd_images, bd_out, bd_grid = "5x5";
  double bd_overlap = 0.5, bd_min_visible = 0.5, bd_holdout = 0.2;
  int bins = 32;
  bool drop_partial = false;
  std::uint64_t bd_seed = 0;
  // train
  std::string tr_samples, tr_out;
  SvmTrainConfig tr;
  // eval
  std::string ev_model, ev_samples, ev_out, ev_part = "held_out";
  double ev_offset = 0.0;

  void add(CLI::App* parent) {
    auto* bd = parent->add_subcommand("build-dataset", "Label tiles and balance them 1:1 for the tile filter");
    bd->add_option("--manifest", bd_manifest, "COCO manifest")->required()->check(CLI::ExistingFile);
    bd->add_option("--images-dir", bd_images, "Root of the manifest file names (default: the manifest directory)");
    bd->add_option("--out", bd_out, "Samples file")->required();
    bd->add_option("--grid", bd_grid, "Tile grid COLSxROWS")->capture_default_str();
    bd->add_option("--overlap", bd_overlap, "Overlap of consecutive tiles")->capture_default_str();
    bd->add_option("--min-visible", bd_min_visible, "Visible fraction for a positive tile")->capture_default_str();
    bd->add_option("--holdout", bd_holdout, "Fraction of images held out")->capture_default_str();
    bd->add_option("--bins", bins, "Histogram bins per channel")->capture_default_str();
    bd->add_flag("--drop-partial", drop_partial, "Skip tiles holding only a sub-threshold part of an object")
        ->capture_default_str();
    bd->add_option("--seed", bd_seed, "Random seed")->capture_default_str();
    bd->callback([this, bd] {
      RunManifest run("filter build-dataset", *bd);
      run.seed(bd_seed);
      run.input(bd_manifest);
      const DatasetManifest m = load_coco(bd_manifest);
      FilterDatasetOptions opts;
      opts.grid = parse_grid(bd_grid, bd_overlap);
      opts.min_visible_ratio = bd_min_visible;
      opts.hist.bins_per_channel = bins;
      opts.holdout_fraction = bd_holdout;
      opts.seed = bd_seed;
      opts.drop_partial_negatives = drop_partial;
      const fs::path root = bd_images.empty() ? fs::path(bd_manifest).parent_path() : fs::path(bd_images);
      const auto ds = build_filter_dataset(m.images.size(), [&](std::size_t i) {
        const ImageRecord& r = m.images[i];
        return AnnotatedImage{r.id, read_image(root / r.file_name), m.ground_truth_of(r.id)};
      }, opts);
      write_text(bd_out, samples_to_string(ds));
      run.output(bd_out);
      run.write(manifest_path_for(bd_out));
      std::cout << "train " << ds.train.size() << " samples, held-out " << ds.held_out.size() << " samples\n";
    });

    auto* t = parent->add_subcommand("train", "Train the linear SVM tile filter");
    t->add_option("--samples", tr_samples, "Samples file")->required()->check(CLI::ExistingFile);
    t->add_option("--out", tr_out, "Model file")->required();
    t->add_option("--lambda", tr.lambda, "L2 regularisation")->capture_default_str();
    t->add_option("--epochs", tr.epochs, "Training epochs")->capture_default_str();
    t->add_option("--seed", tr.seed, "Random seed")->capture_default_str();
    t->callback([this, t] {
      RunManifest run("filter train", *t);
      run.seed(tr.seed);
      run.input(tr_samples);
      const FilterDataset ds = samples_from_string(read_text(tr_samples));
      const auto res = svm_train(ds.train, tr, ds.hist);
      save_model(res.model, tr_out);
      run.output(tr_out);
      run.write(manifest_path_for(tr_out));
      std::printf("training accuracy %.4f on %zu samples\n", res.training_accuracy, ds.train.size());
    });

    auto* e = parent->add_subcommand("eval", "Evaluate a tile filter on a samples file");
    e->add_option("--model", ev_model, "Model file")->required()->check(CLI::ExistingFile);
    e->add_option("--samples", ev_samples, "Samples file")->required()->check(CLI::ExistingFile);
    e->add_option("--part", ev_part, "Which samples: held_out|train")
        ->check(CLI::IsMember({"held_out", "train"}))
        ->capture_default_str();
    e->add_option("--offset", ev_offset, "Decision offset")->capture_default_str();
    e->add_option("--out", ev_out, "Write the result as JSON");
    e->callback([this, e] {
      const LinearSvmModel model = load_model(ev_model);
      const FilterDataset ds = samples_from_string(read_text(ev_samples));
      const auto ev = filter_eval(model, ev_part == "train" ? ds.train : ds.held_out, ev_offset);
      std::printf("accuracy %.4f precision %.4f recall %.4f (tp %zu fp %zu tn %zu fn %zu)\n", ev.accuracy,
                  ev.precision, ev.recall, ev.tp, ev.fp, ev.tn, ev.fn);
      if (!ev_out.empty()) {
        RunManifest run("filter eval", *e);
        run.input(ev_model);
        run.input(ev_samples);
        write_text(ev_out, json{{"accuracy", ev.accuracy}, {"precision", ev.precision}, {"recall", ev.recall},
                                {"tp", ev.tp}, {"fp", ev.fp}, {"tn", ev.tn}, {"fn", ev.fn}}
                               .dump(2) + "\n");
        run.output(ev_out);
        run.write(manifest_path_for(ev_out));
      }
    });
  }
};

struct DetectCmd {
  std::string image, image_id, manifest, images_dir, out;
  std::uint64_t seed = 0;
  int threads = 1;
  PipelineFlags pipe;
  DetectorFlags det;

  void add(CLI::App* parent) {
    auto* app = parent->add_subcommand("run", "Run the tiled pipeline on one image or a manifest");
    app->add_option("--image", image, "Input image (PNG or JPEG)")->check(CLI::ExistingFile);
    app->add_option("--image-id", image_id, "Image id (default: file stem)");
    app->add_option("--manifest", manifest, "COCO manifest for a batch run")->check(CLI::ExistingFile);
    app->add_option("--images-dir", images_dir, "Root of the manifest file names (default: the manifest directory)");
    app->add_option("--out", out, "Output detections document")->required();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--threads", threads, "Worker threads for batch runs")->capture_default_str();
    pipe.add(app);
    det.add(app);
    app->callback([this, app] {
      if (image.empty() == manifest.empty()) throw UsageError("give exactly one of --image or --manifest");
      RunManifest run("detect run", *app);
      run.seed(seed);
      const PipelineConfig cfg = pipe.build();
      std::vector<std::string> categories;
      if (!image.empty()) {
        run.input(image);
        const auto detector = det.build(nullptr, &categories);
        if (categories.empty()) categories = default_categories();
        const Image raster = read_image(image);
        const std::string id = image_id.empty() ? fs::path(image).stem().string() : image_id;
        const auto dets = run_pipeline(id, raster, *detector, cfg, seed);
        write_text(out, detections_document(id, raster.width(), raster.height(), cfg, dets, categories).dump(2) +
                            "\n");
        std::cout << dets.size() << " detections\n";
      } else {
        run.input(manifest);
        const DatasetManifest m = load_coco(manifest);
        const auto detector = det.build(&m, &categories);
        std::vector<BenchImage> imgs;
        for (const auto& r : m.images) imgs.push_back({r.id, r.width, r.height});
        const fs::path root = images_dir.empty() ? fs::path(manifest).parent_path() : fs::path(images_dir);
        const auto preds = run_batch(imgs, *detector, cfg, seed,
                                     [&](std::size_t i) { return read_image(root / m.images[i].file_name); },
                                     threads);
        json docs = json::array();
        std::size_t k = 0;
        for (const auto& img : imgs) {
          std::vector<Detection> dets;
          while (k < preds.size() && preds[k].image_id == img.id) dets.push_back(preds[k++].det);
          docs.push_back(detections_document(img.id, img.width, img.height, cfg, dets, m.categories));
        }
        write_text(out, json{{"images", std::move(docs)}}.dump(2) + "\n");
        std::cout << preds.size() << " detections over " << imgs.size() << " images\n";
      }
      run.output(out);
      run.write(manifest_path_for(out));
    });
  }
};

std::vector<Prediction> load_predictions(const fs::path& path) {
  const json doc = json::parse(read_text(path));
  std::vector<Prediction> out;
  auto add_doc = [&](const json& d) {
    const std::string id = d.at("image_id").get<std::string>();
    for (const Detection& det : detections_from_document(d)) out.push_back({id, det});
  };
  if (doc.contains("images")) {
    for (const json& d : doc.at("images")) add_doc(d);
  } else {
    add_doc(doc);
  }
  return out;
}

struct EvalCmd {
  std::string gt, pred, name = "model", out;

  void add(CLI::App* parent) {
    auto* app = parent->add_subcommand("map", "mAP@.5 and mAP@.5:.95 of a detections file");
    app->add_option("--gt", gt, "COCO manifest with ground truth")->required()->check(CLI::ExistingFile);
    app->add_option("--pred", pred, "Detections document(s) from 'detect run'")->required()->check(CLI::ExistingFile);
    app->add_option("--name", name, "Row label in the table")->capture_default_str();
    app->add_option("--out", out, "Write the report as JSON");
    app->callback([this, app] {
      const DatasetManifest m = load_coco(gt);
      const auto report = evaluate(load_predictions(pred), m.ground_truth(), m.categories);
      std::cout << render_table({{name, report}});
      if (!out.empty()) {
        RunManifest run("eval map", *app);
        run.input(gt);
        run.input(pred);
        write_text(out, report_to_json(report));
        run.output(out);
        run.write(manifest_path_for(out));
      }
    });
  }
};

struct BenchCmd {
  std::string manifest, images_dir, out;
  std::uint64_t seed = 42;
  int threads = 1;
  PipelineFlags pipe;
  DetectorFlags det;

  void add(CLI::App* parent) {
    auto* app = parent->add_subcommand("compare", "Evaluate the untiled and tiled pipelines side by side");
    app->add_option("--manifest", manifest, "COCO manifest with ground truth")->required()->check(CLI::ExistingFile);
    app->add_option("--images-dir", images_dir, "Root of the manifest file names (default: the manifest directory)");
    app->add_option("--out", out, "Comparison report")->required();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--threads", threads, "Worker threads")->capture_default_str();
    pipe.add(app, false);
    det.add(app);
    app->callback([this, app] {
      RunManifest run("bench compare", *app);
      run.seed(seed);
      run.input(manifest);
      const DatasetManifest m = load_coco(manifest);
      std::vector<std::string> categories;
      const auto detector = det.build(&m, &categories);
      PipelineConfig tiled = pipe.build();
      tiled.tiling_enabled = true;
      PipelineConfig untiled = tiled;
      untiled.tiling_enabled = false;
      std::vector<BenchImage> imgs;
      for (const auto& r : m.images) imgs.push_back({r.id, r.width, r.height});
      const fs::path root = images_dir.empty() ? fs::path(manifest).parent_path() : fs::path(images_dir);
      const auto cmp = compare_runs(imgs, m.ground_truth(), m.categories, *detector, tiled, untiled, seed,
                                    [&](std::size_t i) { return read_image(root / m.images[i].file_name); },
                                    threads);
      write_text(out, comparison_to_json(cmp));
      run.output(out);
      run.write(manifest_path_for(out));
      std::cout << render_table({{"untiled", cmp.untiled}, {"tiled", cmp.tiled}});
      std::printf("delta mAP@.5 %+.1f, mAP@.5:.95 %+.1f, recall@.5 %+.1f (points)\n", 100.0 * cmp.delta_map50,
                  100.0 * cmp.delta_map50_95, 100.0 * cmp.delta_recall50);
    });
  }
};

struct ServeCmd {
  ServiceOptions opts;
  PipelineFlags pipe;
  DetectorFlags det;
  std::string categories;
  double max_body_mb = 20.0;
  long ttl_s = 3600;

  void add(CLI::App* parent) {
    auto* app = parent->add_subcommand("serve", "Serve upload/detect/result over HTTP");
    app->add_option("--host", opts.host, "Bind address")->capture_default_str();
    app->add_option("--port", opts.port, "Port (0 picks a free one)")->capture_default_str();
    app->add_option("--seed", opts.seed, "Default random seed")->capture_default_str();
    app->add_flag("--sync", opts.sync, "Process uploads inside the request")->capture_default_str();
    app->add_option("--workers", opts.workers, "Pipeline worker threads")->capture_default_str();
    app->add_option("--ttl", ttl_s, "Seconds a finished result is kept")->capture_default_str();
    app->add_option("--max-body-mb", max_body_mb, "Upload size cap in MiB")->capture_default_str();
    app->add_option("--categories", categories, "Comma-separated class names");
    pipe.add(app);
    det.add(app);
    app->callback([this] {
      std::vector<std::string> names = split_list(categories);
      const auto detector = det.build(nullptr, &names);
      if (names.empty()) names = default_categories();
      opts.categories = names;
      opts.pipeline = pipe.build();
      if (!pipe.filter_path.empty()) opts.filter_fingerprint = file_sha256(pipe.filter_path);
      opts.result_ttl = std::chrono::seconds(ttl_s);
      opts.max_body_bytes = static_cast<std::size_t>(max_body_mb * 1024 * 1024);
      Service svc(detector, opts);
      std::cout << "serving on " << opts.host << ":" << opts.port << " with detector " << detector->kind()
                << std::endl;
      svc.run();
    });
  }
};

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kInvalidDimensions:
      return 1;
    default:
      return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiled small-object detection: tiling, tile filtering, merging and evaluation"};
  app.set_config("--config", "", "Read options from a TOML/INI file; flags override it");
  app.require_subcommand(1);

  SynthCmd synth;
  TilesCmd tiles;
  DatasetCmds dataset;
  FilterCmds filter;
  DetectCmd detect;
  EvalCmd eval;
  BenchCmd bench;
  ServeCmd serve;

  synth.add(app.add_subcommand("synth", "Synthetic data")->require_subcommand(1));
  tiles.add(app.add_subcommand("tiles", "Tile grid planning")->require_subcommand(1));
  dataset.add(app.add_subcommand("dataset", "Dataset splitting, conversion, extension")->require_subcommand(1));
  filter.add(app.add_subcommand("filter", "Tile filter")->require_subcommand(1));
  detect.add(app.add_subcommand("detect", "Detection")->require_subcommand(1));
  eval.add(app.add_subcommand("eval", "Evaluation")->require_subcommand(1));
  bench.add(app.add_subcommand("bench", "Benchmarks")->require_subcommand(1));
  serve.add(&app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
