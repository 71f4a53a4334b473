#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tiledet/data_io.hpp"
#include "tiledet/image.hpp"

namespace tiledet {

struct SynthConfig {
  int image_count = 200;
  int width = 1920;
  int height = 1920;
  int min_objects = 5;
  int max_objects = 15;
  int min_object_size = 10;
  int max_object_size = 40;
  int num_classes = 3;
  std::uint64_t seed = 42;
};

void validate(const SynthConfig& cfg);

enum class SynthShape { kEllipse, kRectangle };

/// Colour and shape of a class. Object colours are saturated; backgrounds are
/// near-gray, so no background pixel ever takes an object colour.
Rgb synth_class_color(int class_id);
SynthShape synth_class_shape(int class_id);

struct SynthObject {
  int class_id = 0;
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

/// Object placement of image `index`. Objects never touch each other.
std::vector<SynthObject> synth_layout(const SynthConfig& cfg, int index);

/// Renders image `index` for a given layout. Background and objects use a
/// different sub-seed from the layout.
Image synth_render(const SynthConfig& cfg, int index, const std::vector<SynthObject>& layout);

std::string synth_image_id(int index);

/// Manifest for the whole dataset, without rendering pixels.
DatasetManifest synth_manifest(const SynthConfig& cfg);

/// Writes images/, labels/, manifest.json and synth_config.json into `out_dir`.
DatasetManifest synth_gen(const SynthConfig& cfg, const std::filesystem::path& out_dir, int threads = 1);

std::string synth_config_to_string(const SynthConfig& cfg);

}  // namespace tiledet
