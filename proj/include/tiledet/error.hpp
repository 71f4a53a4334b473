#pragma once

#include <stdexcept>
#include <string>

namespace tiledet {

/// Broad failure categories. The CLI maps them to exit codes and the
/// service maps them to HTTP statuses.
enum class ErrorKind {
  kInvalidArgument,   // bad configuration or precondition violation
  kInvalidDimensions, // image smaller than a tile grid, empty raster
  kOutOfBounds,
  kFormat,            // malformed file or document
  kNotFound,          // missing key, unknown id, missing file
  kDimensionMismatch,
  kNoPositives,       // filter dataset without target tiles
  kSingleClass,       // SVM training data with one label only
  kZeroGroundTruth,
  kUnsupportedMedia,
  kNotReady,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace tiledet
