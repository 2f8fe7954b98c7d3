#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gic/tensor.hpp"

namespace gic {

struct Rgb8Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels; // row-major RGB triples
};

// 8-bit RGB PNG round trip. Reading normalizes palette/gray/16-bit inputs
// down to RGB8 and drops alpha.
void write_png_rgb8(const std::filesystem::path& path, const Rgb8Image& image);
Rgb8Image read_png_rgb8(const std::filesystem::path& path);

// [3,H,W] float in [0,1] <-> RGB8, quantized by round(v*255).
Rgb8Image tensor_to_rgb8(const TensorF& image);
TensorF rgb8_to_tensor(const Rgb8Image& image);

} // namespace gic
