#include "tiledet/image.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "tiledet/error.hpp"

namespace tiledet {

namespace {

// OpenCV works in BGR; Image is RGB.
cv::Mat to_bgr_mat(const Image& img) {
  cv::Mat rgb(img.height(), img.width(), CV_8UC3, const_cast<std::uint8_t*>(img.bytes().data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

Image from_mat(const cv::Mat& mat) {
  cv::Mat bgr;
  if (mat.channels() == 1) {
    cv::cvtColor(mat, bgr, cv::COLOR_GRAY2BGR);
  } else if (mat.channels() == 4) {
    cv::cvtColor(mat, bgr, cv::COLOR_BGRA2BGR);
  } else {
    bgr = mat;
  }
  if (bgr.depth() != CV_8U) {
    throw Error(ErrorKind::kUnsupportedMedia, "only 8-bit images are supported");
  }
  Image out(bgr.cols, bgr.rows);
  cv::Mat rgb(out.height(), out.width(), CV_8UC3, out.bytes().data());
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return out;
}

}  // namespace

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorKind::kInvalidDimensions, "negative image size");
  data_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

Image decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw Error(ErrorKind::kUnsupportedMedia, "empty image payload");
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat mat;
  try {
    mat = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception&) {
    mat.release();
  }
  if (mat.empty()) throw Error(ErrorKind::kUnsupportedMedia, "payload is not a decodable PNG or JPEG image");
  return from_mat(mat);
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.empty()) throw Error(ErrorKind::kInvalidDimensions, "cannot encode an empty image");
  std::vector<std::uint8_t> out;
  const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 1};
  if (!cv::imencode(".png", to_bgr_mat(img), out, params)) {
    throw Error(ErrorKind::kIo, "png encoding failed");
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kNotFound, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image read_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_png(const Image& img, const std::filesystem::path& path) {
  const auto bytes = encode_png(img);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "short write to " + path.string());
}

Image resize(const Image& img, int width, int height) {
  if (width <= 0 || height <= 0) throw Error(ErrorKind::kInvalidDimensions, "resize target must be positive");
  if (width == img.width() && height == img.height()) return img;
  cv::Mat src(img.height(), img.width(), CV_8UC3, const_cast<std::uint8_t*>(img.bytes().data()));
  Image out(width, height);
  cv::Mat dst(height, width, CV_8UC3, out.bytes().data());
  cv::resize(src, dst, dst.size(), 0, 0, cv::INTER_LINEAR);
  return out;
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, Rgb color) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width());
  y1 = std::min(y1, img.height());
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) img.set(x, y, color);
  }
}

void draw_text(Image& img, const std::string& text, int x, int y, double scale, Rgb color) {
  if (img.empty()) return;
  cv::Mat rgb(img.height(), img.width(), CV_8UC3, img.bytes().data());
  cv::putText(rgb, text, {x, y}, cv::FONT_HERSHEY_SIMPLEX, scale, cv::Scalar(color.r, color.g, color.b), 1,
              cv::LINE_8);
}

}  // namespace tiledet
