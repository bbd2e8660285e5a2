#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ufse/tensor.hpp"

namespace ufse {

// Reads an 8-bit PNG or JPEG (detected by signature) into a 3×H×W tensor
// with values b/255. Grayscale and palette inputs are expanded to RGB.
Tensor<float> image_read(const std::string& path);

// Writes a 3×H×W (or 1×3×H×W) tensor, clamping to [0,1] and quantizing to
// round(v·255). The format follows the extension (.jpg/.jpeg, else PNG).
void image_write(const std::string& path, const Tensor<float>& image);

void write_png_gray(const std::string& path, int width, int height, std::span<const std::uint8_t> pixels);
void write_png_rgb(const std::string& path, int width, int height, std::span<const std::uint8_t> interleaved);

// Tiles equally sized 3×H×W images row-major into a grid with `columns` columns.
Tensor<float> image_grid(const std::vector<Tensor<float>>& images, int columns);

}  // namespace ufse
