#pragma once

#include <cstdint>
#include <string>

#include "ufse/tensor.hpp"

namespace ufse {

// Procedural stand-ins for photo and painting datasets. Content images are
// smooth gradients with a few flat-shaded shapes; style images are periodic
// textures (stripes, checkers, rings) in a random palette with noise.
Tensor<float> synth_content_image(std::int64_t height, std::int64_t width, std::uint64_t seed);
Tensor<float> synth_style_image(std::int64_t height, std::int64_t width, std::uint64_t seed);

// Writes `count` PNGs of each kind into <dir>/content and <dir>/style.
// Sizes vary slightly around min_side so resizing is exercised.
void write_synth_dataset(const std::string& dir, int count, int min_side, std::uint64_t seed);

}  // namespace ufse
