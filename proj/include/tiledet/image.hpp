#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tiledet {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit RGB raster, row-major, channels interleaved.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  Rgb at(int x, int y) const {
    const std::uint8_t* p = &data_[offset(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    std::uint8_t* p = &data_[offset(x, y)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  std::span<const std::uint8_t> bytes() const { return data_; }
  std::span<std::uint8_t> bytes() { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Decodes PNG or JPEG bytes. Throws kUnsupportedMedia when undecodable.
Image decode_image(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Image& img);

Image read_image(const std::filesystem::path& path);
void write_png(const Image& img, const std::filesystem::path& path);

/// Bilinear resize.
Image resize(const Image& img, int width, int height);

/// Fills the half-open pixel rectangle [x0,x1)x[y0,y1), clipped to the raster.
void fill_rect(Image& img, int x0, int y0, int x1, int y1, Rgb color);

/// Draws `text` with its baseline-left corner at (x, y) using a Hershey font.
void draw_text(Image& img, const std::string& text, int x, int y, double scale, Rgb color);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace tiledet
