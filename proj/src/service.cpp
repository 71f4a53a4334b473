#include "tiledet/service.hpp"

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_LISTEN_BACKLOG 256
#include <httplib.h>
#include <openssl/evp.h>

#include "tiledet/documents.hpp"
#include "tiledet/error.hpp"

namespace tiledet {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::array<Rgb, 10> kPalette{{
    {255, 56, 56},
    {44, 153, 168},
    {72, 249, 10},
    {255, 157, 151},
    {255, 112, 31},
    {146, 204, 23},
    {61, 219, 134},
    {26, 147, 52},
    {0, 212, 187},
    {132, 56, 255},
}};

constexpr int kLineWidth = 3;

std::string to_hex(const unsigned char* data, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(digits[data[i] >> 4]);
    out.push_back(digits[data[i] & 15]);
  }
  return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kIo, "sha256 failed");
  }
  return to_hex(md, len);
}

int http_status(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kInvalidDimensions:
    case ErrorKind::kDimensionMismatch:
      return 400;
    case ErrorKind::kNotFound:
      return 404;
    case ErrorKind::kNotReady:
      return 409;
    case ErrorKind::kUnsupportedMedia:
      return 415;
    default:
      return 500;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

bool parse_flag(const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw Error(ErrorKind::kInvalidArgument, "tiling must be 'on' or 'off', got '" + v + "'");
}

double parse_number(const std::string& name, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorKind::kInvalidArgument, name + " must be a number, got '" + v + "'");
}

TileGridSpec parse_grid(const std::string& v, double overlap) {
  int cols = 0;
  int rows = 0;
  char sep = 0;
  std::istringstream in(v);
  if (!(in >> cols >> sep >> rows) || (sep != 'x' && sep != 'X') || !in.eof()) {
    throw Error(ErrorKind::kInvalidArgument, "grid must look like '5x5', got '" + v + "'");
  }
  return {cols, rows, overlap};
}

}  // namespace

Rgb class_color(int class_id) {
  return kPalette[static_cast<std::size_t>(std::max(class_id, 0)) % kPalette.size()];
}

Image annotate(const Image& image, const std::vector<Detection>& dets, const std::vector<std::string>& categories) {
  Image out = image;
  struct PixelBox {
    int x0, y0, x1, y1;
  };
  std::vector<PixelBox> boxes;
  for (const Detection& d : dets) {
    const BBox b = clip_to(d.bbox, image.width(), image.height());
    boxes.push_back({static_cast<int>(std::lround(b.x)), static_cast<int>(std::lround(b.y)),
                     static_cast<int>(std::lround(b.right())), static_cast<int>(std::lround(b.bottom()))});
  }
  // Labels first so that rectangle pixels are never overwritten by text.
  for (std::size_t i = 0; i < dets.size(); ++i) {
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.1f%%", 100.0 * dets[i].score);
    const std::string label = category_name(categories, dets[i].class_id) + " " + pct;
    const PixelBox& p = boxes[i];
    const int baseline = p.y0 >= 14 ? p.y0 - 4 : p.y0 + 14;
    draw_text(out, label, p.x0 + (p.y0 >= 14 ? 0 : 4), baseline, 0.4, class_color(dets[i].class_id));
  }
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const PixelBox& p = boxes[i];
    if (p.x1 <= p.x0 || p.y1 <= p.y0) continue;
    const Rgb c = class_color(dets[i].class_id);
    fill_rect(out, p.x0, p.y0, p.x1, std::min(p.y1, p.y0 + kLineWidth), c);
    fill_rect(out, p.x0, std::max(p.y0, p.y1 - kLineWidth), p.x1, p.y1, c);
    fill_rect(out, p.x0, p.y0, std::min(p.x1, p.x0 + kLineWidth), p.y1, c);
    fill_rect(out, std::max(p.x0, p.x1 - kLineWidth), p.y0, p.x1, p.y1, c);
  }
  return out;
}

std::string file_sha256(const std::string& path) { return sha256_hex(read_file_bytes(path)); }

// Job store -----------------------------------------------------------------

namespace {

enum class JobState { kQueued, kProcessing, kDone, kFailed };

const char* state_name(JobState s) {
  switch (s) {
    case JobState::kQueued:
      return "queued";
    case JobState::kProcessing:
      return "processing";
    case JobState::kDone:
      return "done";
    case JobState::kFailed:
      return "failed";
  }
  return "unknown";
}

struct Job {
  std::string id;
  JobState state = JobState::kQueued;
  std::chrono::system_clock::time_point received;
  Clock::time_point finished;
  PipelineConfig config;
  std::uint64_t seed = 0;
  std::string image_id;
  Image raster;
  std::vector<Detection> detections;
  std::string error;
};

}  // namespace

struct Service::Impl {
  std::shared_ptr<const Detector> detector;
  ServiceOptions opts;
  httplib::Server server;
  std::thread listener;
  Clock::time_point started = Clock::now();
  int bound_port = 0;

  // Jobs are immutable once done or failed; transitions happen under the
  // exclusive lock, reads under the shared lock.
  mutable std::shared_mutex jobs_mu;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::mt19937_64 id_rng{std::random_device{}()};
  std::uint64_t id_counter = 0;

  std::mutex queue_mu;
  std::condition_variable queue_cv;
  std::deque<std::shared_ptr<Job>> queue;
  bool stopping = false;
  std::vector<std::thread> workers;

  Impl(std::shared_ptr<const Detector> d, ServiceOptions o) : detector(std::move(d)), opts(std::move(o)) {
    validate(opts.pipeline);
    server.set_payload_max_length(opts.max_body_bytes);
    const auto threads = static_cast<std::size_t>(std::max(1, opts.connection_threads));
    server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    server.set_keep_alive_timeout(1);
    routes();
    if (!opts.sync) {
      for (int i = 0; i < std::max(1, opts.workers); ++i) workers.emplace_back([this] { work(); });
    }
  }

  ~Impl() {
    server.stop();
    if (listener.joinable()) listener.join();
    {
      std::lock_guard lock(queue_mu);
      stopping = true;
    }
    queue_cv.notify_all();
    for (auto& w : workers) w.join();
  }

  std::string new_id() {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%016llx%08llx", static_cast<unsigned long long>(id_rng()),
                  static_cast<unsigned long long>(++id_counter));
    return buf;
  }

  void evict_expired() {
    const auto now = Clock::now();
    std::unique_lock lock(jobs_mu);
    for (auto it = jobs.begin(); it != jobs.end();) {
      const Job& j = *it->second;
      const bool finished = j.state == JobState::kDone || j.state == JobState::kFailed;
      if (finished && now - j.finished > opts.result_ttl) {
        it = jobs.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::shared_ptr<Job> find(const std::string& id) {
    evict_expired();
    std::shared_lock lock(jobs_mu);
    auto it = jobs.find(id);
    return it == jobs.end() ? nullptr : it->second;
  }

  void process(const std::shared_ptr<Job>& job) {
    PipelineConfig cfg;
    std::uint64_t seed = 0;
    std::string image_id;
    {
      std::unique_lock lock(jobs_mu);
      job->state = JobState::kProcessing;
      cfg = job->config;
      seed = job->seed;
      image_id = job->image_id;
    }
    std::vector<Detection> dets;
    std::string error;
    bool ok = true;
    try {
      dets = run_pipeline(image_id, job->raster, *detector, cfg, seed);
    } catch (const std::exception& e) {
      ok = false;
      error = e.what();
    }
    std::unique_lock lock(jobs_mu);
    job->detections = std::move(dets);
    job->error = std::move(error);
    job->finished = Clock::now();
    job->state = ok ? JobState::kDone : JobState::kFailed;
  }

  void work() {
    for (;;) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lock(queue_mu);
        queue_cv.wait(lock, [this] { return stopping || !queue.empty(); });
        if (stopping && queue.empty()) return;
        job = std::move(queue.front());
        queue.pop_front();
      }
      process(job);
    }
  }

  PipelineConfig config_from_query(const httplib::Request& req) const {
    PipelineConfig cfg = opts.pipeline;
    if (req.has_param("tiling")) cfg.tiling_enabled = parse_flag(req.get_param_value("tiling"));
    if (req.has_param("overlap")) cfg.grid.overlap = parse_number("overlap", req.get_param_value("overlap"));
    if (req.has_param("grid")) cfg.grid = parse_grid(req.get_param_value("grid"), cfg.grid.overlap);
    if (req.has_param("nms")) cfg.nms.iou_threshold = parse_number("nms", req.get_param_value("nms"));
    validate(cfg.grid);
    validate(cfg);
    return cfg;
  }

  void upload(const httplib::Request& req, httplib::Response& res) {
    std::string_view body = req.body;
    if (req.is_multipart_form_data()) {
      auto it = req.files.find("image");
      if (it == req.files.end()) it = req.files.begin();
      body = it == req.files.end() ? std::string_view{} : std::string_view(it->second.content);
    }
    if (body.size() > opts.max_body_bytes) {
      send_error(res, 413, "payload exceeds " + std::to_string(opts.max_body_bytes) + " bytes");
      return;
    }
    const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(body.data()), body.size());

    auto job = std::make_shared<Job>();
    try {
      job->config = config_from_query(req);
      job->seed = opts.seed;
      if (req.has_param("seed")) {
        const std::string s = req.get_param_value("seed");
        try {
          std::size_t pos = 0;
          job->seed = std::stoull(s, &pos);
          if (pos != s.size()) throw std::invalid_argument(s);
        } catch (const std::logic_error&) {
          throw Error(ErrorKind::kInvalidArgument, "seed must be an unsigned integer, got '" + s + "'");
        }
      }
      job->raster = decode_image(bytes);
    } catch (const Error& e) {
      send_error(res, http_status(e.kind()), e.what());
      return;
    }
    job->image_id = req.has_param("image_id") ? req.get_param_value("image_id") : sha256_hex(bytes).substr(0, 16);
    job->received = std::chrono::system_clock::now();
    {
      std::unique_lock lock(jobs_mu);
      job->id = new_id();
      jobs[job->id] = job;
    }
    if (opts.sync) {
      process(job);
    } else {
      {
        std::lock_guard lock(queue_mu);
        queue.push_back(job);
      }
      queue_cv.notify_one();
    }
    std::shared_lock lock(jobs_mu);
    send_json(res, 200, {{"id", job->id}, {"state", state_name(job->state)}, {"image_id", job->image_id}});
  }

  void result(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto job = find(id);
    if (!job) {
      send_error(res, 404, "unknown job id '" + id + "'");
      return;
    }
    std::shared_lock lock(jobs_mu);
    json doc;
    if (job->state == JobState::kDone) {
      doc = detections_document(job->image_id, job->raster.width(), job->raster.height(), job->config,
                                job->detections, opts.categories);
    } else {
      doc["image_id"] = job->image_id;
      if (job->state == JobState::kFailed) doc["error"] = job->error;
    }
    doc["id"] = job->id;
    doc["state"] = state_name(job->state);
    send_json(res, 200, doc);
  }

  void annotated(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto job = find(id);
    if (!job) {
      send_error(res, 404, "unknown job id '" + id + "'");
      return;
    }
    std::shared_lock lock(jobs_mu);
    if (job->state != JobState::kDone) {
      send_error(res, 409, std::string("job is ") + state_name(job->state) + ", no annotated image yet");
      return;
    }
    const auto png = encode_png(annotate(job->raster, job->detections, opts.categories));
    res.status = 200;
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  }

  void health(httplib::Response& res) const {
    const double uptime = std::chrono::duration<double>(Clock::now() - started).count();
    json j{{"state", "ok"}, {"detector", detector->kind()}, {"uptime_s", uptime}};
    j["filter_fingerprint"] = opts.filter_fingerprint.empty() ? json(nullptr) : json(opts.filter_fingerprint);
    send_json(res, 200, j);
  }

  void routes() {
    server.Post("/api/v1/images", [this](const httplib::Request& req, httplib::Response& res) { upload(req, res); });
    server.Get(R"(/api/v1/results/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) { result(req, res); });
    server.Get(R"(/api/v1/results/([^/]+)/annotated)",
               [this](const httplib::Request& req, httplib::Response& res) { annotated(req, res); });
    server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) { health(res); });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send_error(res, http_status(e.kind()), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    });
  }

  int bind() {
    if (opts.port == 0) {
      bound_port = server.bind_to_any_port(opts.host);
    } else {
      bound_port = server.bind_to_port(opts.host, opts.port) ? opts.port : -1;
    }
    if (bound_port < 0) {
      throw Error(ErrorKind::kIo, "cannot bind " + opts.host + ":" + std::to_string(opts.port));
    }
    return bound_port;
  }
};

Service::Service(std::shared_ptr<const Detector> detector, ServiceOptions opts)
    : impl_(std::make_unique<Impl>(std::move(detector), std::move(opts))) {}

Service::~Service() = default;

int Service::start() {
  const int port = impl_->bind();
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::run() {
  impl_->bind();
  impl_->server.listen_after_bind();
}

void Service::stop() { impl_->server.stop(); }

int Service::port() const { return impl_->bound_port; }

}  // namespace tiledet
