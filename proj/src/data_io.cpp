#include "tiledet/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tiledet/error.hpp"
#include "tiledet/image.hpp"
#include "tiledet/random.hpp"

namespace tiledet {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& default_categories() {
  static const std::vector<std::string> names{"caries", "pfs_requirement", "no_pfs_requirement"};
  return names;
}

std::vector<GroundTruthBox> DatasetManifest::ground_truth() const {
  std::vector<GroundTruthBox> out;
  out.reserve(annotations.size());
  for (const Annotation& a : annotations) out.push_back(a.box);
  return out;
}

std::vector<GroundTruthBox> DatasetManifest::ground_truth_of(const std::string& image_id) const {
  std::vector<GroundTruthBox> out;
  for (const Annotation& a : annotations) {
    if (a.box.image_id == image_id) out.push_back(a.box);
  }
  return out;
}

const ImageRecord* DatasetManifest::find_image(const std::string& id) const {
  for (const ImageRecord& r : images) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

void validate(const DatasetManifest& m) {
  if (m.category_ids.size() != m.categories.size()) {
    throw Error(ErrorKind::kFormat, "category id list does not match category names");
  }
  std::set<std::string> ids;
  for (const ImageRecord& r : m.images) {
    if (!ids.insert(r.id).second) throw Error(ErrorKind::kFormat, "duplicate image id '" + r.id + "'");
  }
  std::set<std::int64_t> ann_ids;
  for (const Annotation& a : m.annotations) {
    if (!ann_ids.insert(a.id).second) throw Error(ErrorKind::kFormat, "duplicate annotation id " + std::to_string(a.id));
    if (!ids.contains(a.box.image_id)) {
      throw Error(ErrorKind::kFormat, "annotation " + std::to_string(a.id) + " references unknown image '" +
                                          a.box.image_id + "'");
    }
    if (a.box.class_id < 0 || a.box.class_id >= static_cast<int>(m.categories.size())) {
      throw Error(ErrorKind::kFormat, "annotation " + std::to_string(a.id) + " has class " +
                                          std::to_string(a.box.class_id) + " outside the category list");
    }
  }
}

DatasetManifest make_manifest(std::vector<std::string> categories) {
  DatasetManifest m;
  m.categories = std::move(categories);
  for (std::size_t i = 0; i < m.categories.size(); ++i) m.category_ids.push_back(static_cast<std::int64_t>(i + 1));
  return m;
}

// YOLO ----------------------------------------------------------------------

std::vector<GroundTruthBox> parse_yolo_labels(const std::string& text, int image_width, int image_height,
                                              const std::string& image_id) {
  if (image_width < 1 || image_height < 1) throw Error(ErrorKind::kInvalidDimensions, "image size must be positive");
  std::vector<GroundTruthBox> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    auto malformed = [&](const std::string& why) {
      return Error(ErrorKind::kFormat, "line " + std::to_string(line_no) + ": " + why);
    };
    if (tok.size() != 5) throw malformed("expected 'class cx cy w h', got " + std::to_string(tok.size()) + " fields");
    int cls = 0;
    double v[4];
    try {
      std::size_t pos = 0;
      cls = std::stoi(tok[0], &pos);
      if (pos != tok[0].size() || cls < 0) throw malformed("bad class id '" + tok[0] + "'");
      for (int k = 0; k < 4; ++k) {
        v[k] = std::stod(tok[static_cast<std::size_t>(k + 1)], &pos);
        if (pos != tok[static_cast<std::size_t>(k + 1)].size()) throw std::invalid_argument("trailing");
      }
    } catch (const std::logic_error&) {
      throw malformed("non-numeric field");
    }
    for (double x : v) {
      if (!(x >= 0.0 && x <= 1.0)) {
        throw Error(ErrorKind::kOutOfBounds, "line " + std::to_string(line_no) + ": value outside [0,1]");
      }
    }
    GroundTruthBox g;
    g.class_id = cls;
    g.image_id = image_id;
    g.bbox = {(v[0] - v[2] / 2) * image_width, (v[1] - v[3] / 2) * image_height, v[2] * image_width,
              v[3] * image_height};
    out.push_back(std::move(g));
  }
  return out;
}

std::string emit_yolo_labels(const std::vector<GroundTruthBox>& gts, int image_width, int image_height) {
  std::string out;
  for (const GroundTruthBox& g : gts) {
    const double v[4] = {(g.bbox.x + g.bbox.w / 2) / image_width, (g.bbox.y + g.bbox.h / 2) / image_height,
                         g.bbox.w / image_width, g.bbox.h / image_height};
    for (double x : v) {
      if (!(x >= -1e-9 && x <= 1.0 + 1e-9)) {
        throw Error(ErrorKind::kOutOfBounds, "box of image '" + g.image_id + "' extends outside the image");
      }
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f\n", g.class_id, std::clamp(v[0], 0.0, 1.0),
                  std::clamp(v[1], 0.0, 1.0), std::clamp(v[2], 0.0, 1.0), std::clamp(v[3], 0.0, 1.0));
    out += buf;
  }
  return out;
}

// COCO ----------------------------------------------------------------------

namespace {

std::string id_string(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
  throw Error(ErrorKind::kFormat, "image id must be a string or an integer");
}

json id_json(const std::string& id) {
  // Canonical decimal ids go out as integers, everything else as strings.
  if (!id.empty() && id.size() < 18 && std::all_of(id.begin(), id.end(), ::isdigit) &&
      (id == "0" || id.front() != '0')) {
    return std::stoll(id);
  }
  return id;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kNotFound, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "short write to " + path.string());
}

}  // namespace

DatasetManifest coco_from_string(const std::string& text) {
  try {
    const json doc = json::parse(text);
    DatasetManifest m;
    std::map<std::int64_t, int> dense;
    for (const json& c : doc.at("categories")) {
      const auto id = c.at("id").get<std::int64_t>();
      if (dense.contains(id)) throw Error(ErrorKind::kFormat, "duplicate category id " + std::to_string(id));
      dense[id] = static_cast<int>(m.categories.size());
      m.categories.push_back(c.at("name").get<std::string>());
      m.category_ids.push_back(id);
    }
    for (const json& im : doc.at("images")) {
      ImageRecord r;
      r.id = id_string(im.at("id"));
      r.file_name = im.at("file_name").get<std::string>();
      r.width = im.at("width").get<int>();
      r.height = im.at("height").get<int>();
      if (im.contains("source_id")) {
        r.provenance = TileProvenance{id_string(im.at("source_id")), im.at("tile_col").get<int>(),
                                      im.at("tile_row").get<int>()};
      }
      m.images.push_back(std::move(r));
    }
    for (const json& a : doc.at("annotations")) {
      Annotation ann;
      ann.id = a.at("id").get<std::int64_t>();
      ann.box.image_id = id_string(a.at("image_id"));
      const auto cat = a.at("category_id").get<std::int64_t>();
      const auto it = dense.find(cat);
      if (it == dense.end()) {
        throw Error(ErrorKind::kFormat, "annotation " + std::to_string(ann.id) + " references unknown category " +
                                            std::to_string(cat));
      }
      ann.box.class_id = it->second;
      const auto bb = a.at("bbox").get<std::vector<double>>();
      if (bb.size() != 4) throw Error(ErrorKind::kFormat, "bbox must have 4 entries");
      ann.box.bbox = {bb[0], bb[1], bb[2], bb[3]};
      m.annotations.push_back(std::move(ann));
    }
    validate(m);
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("malformed COCO document: ") + e.what());
  }
}

std::string coco_to_string(const DatasetManifest& m, int indent) {
  validate(m);
  json images = json::array();
  for (const ImageRecord& r : m.images) {
    json im{{"id", id_json(r.id)}, {"file_name", r.file_name}, {"width", r.width}, {"height", r.height}};
    if (r.provenance) {
      im["source_id"] = id_json(r.provenance->source_id);
      im["tile_col"] = r.provenance->col;
      im["tile_row"] = r.provenance->row;
    }
    images.push_back(std::move(im));
  }
  json anns = json::array();
  for (const Annotation& a : m.annotations) {
    const BBox& b = a.box.bbox;
    anns.push_back({{"id", a.id},
                    {"image_id", id_json(a.box.image_id)},
                    {"category_id", m.category_ids[static_cast<std::size_t>(a.box.class_id)]},
                    {"bbox", {b.x, b.y, b.w, b.h}},
                    {"area", b.area()},
                    {"iscrowd", 0}});
  }
  json cats = json::array();
  for (std::size_t i = 0; i < m.categories.size(); ++i) {
    cats.push_back({{"id", m.category_ids[i]}, {"name", m.categories[i]}});
  }
  json doc{{"images", std::move(images)}, {"annotations", std::move(anns)}, {"categories", std::move(cats)}};
  return doc.dump(indent) + "\n";
}

DatasetManifest load_coco(const fs::path& path) {
  try {
    return coco_from_string(read_text(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void save_coco(const DatasetManifest& m, const fs::path& path) { write_text(path, coco_to_string(m)); }

void write_yolo_dir(const DatasetManifest& m, const fs::path& dir) {
  fs::create_directories(dir);
  for (const ImageRecord& r : m.images) {
    write_text(dir / (fs::path(r.file_name).stem().string() + ".txt"),
               emit_yolo_labels(m.ground_truth_of(r.id), r.width, r.height));
  }
}

DatasetManifest read_yolo_dir(const fs::path& images_dir, const fs::path& labels_dir,
                              std::vector<std::string> categories) {
  DatasetManifest m = make_manifest(std::move(categories));
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images_dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::int64_t next_ann = 1;
  for (const fs::path& f : files) {
    const Image img = read_image(f);
    ImageRecord r{f.stem().string(), f.filename().string(), img.width(), img.height(), std::nullopt};
    const fs::path label = labels_dir / (f.stem().string() + ".txt");
    if (fs::exists(label)) {
      std::vector<GroundTruthBox> gts;
      try {
        gts = parse_yolo_labels(read_text(label), r.width, r.height, r.id);
      } catch (const Error& e) {
        throw Error(e.kind(), label.string() + ": " + e.what());
      }
      for (auto& g : gts) {
        if (g.class_id >= static_cast<int>(m.categories.size())) {
          throw Error(ErrorKind::kFormat, label.string() + ": class " + std::to_string(g.class_id) +
                                              " has no category name");
        }
        m.annotations.push_back({next_ann++, std::move(g)});
      }
    }
    m.images.push_back(std::move(r));
  }
  return m;
}

// Splitting -----------------------------------------------------------------

void validate(const SplitSpec& spec) {
  if (spec.train < 0.0 || spec.val < 0.0 || spec.test < 0.0 ||
      std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidArgument, "split ratios must be non-negative and sum to 1");
  }
}

DatasetSplit split(const DatasetManifest& m, const SplitSpec& spec) {
  validate(spec);
  const std::size_t n = m.images.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::floor(n * spec.train + 1e-9));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::floor(n * spec.val + 1e-9)));

  std::vector<int> part(n, 2);
  for (std::size_t k = 0; k < n_train; ++k) part[order[k]] = 0;
  for (std::size_t k = n_train; k < n_train + n_val; ++k) part[order[k]] = 1;

  DatasetSplit out;
  DatasetManifest* dst[3] = {&out.train, &out.val, &out.test};
  std::map<std::string, int> part_of;
  for (DatasetManifest* d : dst) {
    d->categories = m.categories;
    d->category_ids = m.category_ids;
  }
  for (std::size_t i = 0; i < n; ++i) {
    dst[part[i]]->images.push_back(m.images[i]);
    part_of[m.images[i].id] = part[i];
  }
  for (const Annotation& a : m.annotations) dst[part_of.at(a.box.image_id)]->annotations.push_back(a);
  return out;
}

// Extended dataset ----------------------------------------------------------

ExtendResult materialize_extended(const DatasetManifest& m, const fs::path& images_root, const fs::path& out_dir,
                                  const TileGridSpec& grid, double min_visible_ratio) {
  validate(grid);
  ExtendResult res;
  res.manifest.categories = m.categories;
  res.manifest.category_ids = m.category_ids;
  if (m.images.empty()) return res;

  const fs::path img_dir = out_dir / "images";
  fs::create_directories(img_dir);
  std::int64_t next_ann = 1;

  for (const ImageRecord& rec : m.images) {
    Image raster;
    try {
      raster = read_image(images_root / rec.file_name);
    } catch (const Error& e) {
      res.errors.push_back(rec.id + ": " + e.what());
      continue;
    }
    const auto gts = m.ground_truth_of(rec.id);

    ImageRecord full = rec;
    full.file_name = "images/" + fs::path(rec.file_name).filename().string();
    std::error_code ec;
    fs::copy_file(images_root / rec.file_name, out_dir / full.file_name, fs::copy_options::overwrite_existing, ec);
    if (ec) {
      res.errors.push_back(rec.id + ": " + ec.message());
      continue;
    }
    res.manifest.images.push_back(full);
    for (const auto& g : gts) res.manifest.annotations.push_back({next_ann++, g});

    std::vector<Tile> tiles;
    try {
      tiles = plan_tiles(raster.width(), raster.height(), grid);
    } catch (const Error& e) {
      res.errors.push_back(rec.id + ": " + e.what());
      continue;
    }
    for (const Tile& tile : tiles) {
      ImageRecord tr;
      tr.id = rec.id + "_r" + std::to_string(tile.row) + "_c" + std::to_string(tile.col);
      tr.file_name = "images/" + tr.id + ".png";
      tr.width = tile.width;
      tr.height = tile.height;
      tr.provenance = TileProvenance{rec.id, tile.col, tile.row};
      try {
        write_png(crop_tile(raster, tile), out_dir / tr.file_name);
      } catch (const Error& e) {
        res.errors.push_back(tr.id + ": " + e.what());
        continue;
      }
      for (GroundTruthBox g : assign_gt_to_tile(tile, gts, min_visible_ratio)) {
        g.image_id = tr.id;
        res.manifest.annotations.push_back({next_ann++, std::move(g)});
      }
      res.manifest.images.push_back(std::move(tr));
    }
  }
  return res;
}

}  // namespace tiledet
