#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tiledet/detector.hpp"
#include "tiledet/image.hpp"
#include "tiledet/pipeline.hpp"

namespace tiledet {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  /// Run the pipeline inside the upload request instead of on a worker.
  bool sync = false;
  std::chrono::seconds result_ttl{3600};
  std::size_t max_body_bytes = 20u * 1024u * 1024u;
  int workers = 2;
  /// Threads serving HTTP connections.
  int connection_threads = 64;
  std::uint64_t seed = 0;
  PipelineConfig pipeline;
  std::vector<std::string> categories;
  /// SHA-256 of the loaded filter model file, empty when no filter.
  std::string filter_fingerprint;
};

/// Fixed colour of a class in annotated images.
Rgb class_color(int class_id);

/// Draws each detection as a 3 px rectangle inside its pixel box
/// [x, x+w) x [y, y+h) and labels it "name score%".
Image annotate(const Image& image, const std::vector<Detection>& dets, const std::vector<std::string>& categories);

/// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::string& path);

/// HTTP front end: upload an image, poll the result, fetch an annotated PNG.
///   POST /api/v1/images                  -> {"id", "state"}
///   GET  /api/v1/results/{id}            -> detections document with "state"
///   GET  /api/v1/results/{id}/annotated  -> image/png
///   GET  /healthz
class Service {
 public:
  Service(std::shared_ptr<const Detector> detector, ServiceOptions opts);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread. Returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tiledet
