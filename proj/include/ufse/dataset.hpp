#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ufse/tensor.hpp"

namespace ufse {

// PNG/JPEG files directly inside `dir`, sorted by name.
std::vector<std::string> list_images(const std::string& dir);

// Bilinear resampling of a 3×H×W image (half-pixel centres, edge clamped).
Tensor<float> resize_bilinear(const Tensor<float>& image, std::int64_t height, std::int64_t width);

// Scales the shorter side to resize_to (aspect kept, long side rounded), then
// takes a uniformly random crop_to × crop_to window.
Tensor<float> preprocess(const Tensor<float>& image, int resize_to, int crop_to, std::mt19937_64& rng);

/// Directory of images, each decoded and resized once on first use.
class ImageDataset {
 public:
  ImageDataset(const std::string& dir, int resize_to);

  std::size_t size() const { return paths_.size(); }
  const std::string& path(std::size_t i) const { return paths_.at(i); }
  // Image already scaled to the resize target.
  const Tensor<float>& resized(std::size_t i);
  Tensor<float> sample(std::size_t i, int crop_to, std::mt19937_64& rng);

 private:
  std::vector<std::string> paths_;
  std::vector<Tensor<float>> cache_;
  int resize_to_;
};

}  // namespace ufse
