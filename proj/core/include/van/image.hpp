#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "van/nn/tensor.hpp"

namespace van {

/// Images are (H, W, C) tensors with values in [0, 1].
using Image = nn::Tensor;

/// Bilinear resampling with half-pixel centers (a x0.5 resize averages 2x2 blocks).
Image resize_bilinear(const Image& image, std::size_t height, std::size_t width);

/// Zero padding at the bottom and right.
Image pad_bottom_right(const Image& image, std::size_t height, std::size_t width);

/// Grey PGM (binary P5, 8- or 16-bit). Values are rounded to 8 bits on write.
void write_pgm(const std::filesystem::path& path, const Image& image);
Image read_pgm(const std::filesystem::path& path);
/// 8-bit quantization as performed by write_pgm.
Image quantize_8bit(const Image& image);

}  // namespace van
