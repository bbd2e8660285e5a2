#include "ufse/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>

#include "ufse/image.hpp"

namespace ufse {

namespace fs = std::filesystem;

std::vector<std::string> list_images(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("image directory not found: " + dir);
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Tensor<float> resize_bilinear(const Tensor<float>& image, std::int64_t height, std::int64_t width) {
  if (image.rank() != 3) throw UsageError("resize expects a C×H×W image");
  const std::int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (height < 1 || width < 1) throw UsageError("resize target must be positive");
  if (height == h && width == w) return image;
  auto src = image.data();
  std::vector<float> out(static_cast<std::size_t>(c * height * width));
  struct Tap {
    std::int64_t i0, i1;
    float f;
  };
  auto taps = [](std::int64_t out_n, std::int64_t in_n) {
    std::vector<Tap> t(static_cast<std::size_t>(out_n));
    const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
    for (std::int64_t o = 0; o < out_n; ++o) {
      const double x = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(in_n - 1));
      const auto i0 = static_cast<std::int64_t>(std::floor(x));
      t[o] = {i0, std::min(i0 + 1, in_n - 1), static_cast<float>(x - static_cast<double>(i0))};
    }
    return t;
  };
  const auto ty = taps(height, h), tx = taps(width, w);
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const float* s = src.data() + ch * h * w;
    float* d = out.data() + ch * height * width;
    for (std::int64_t y = 0; y < height; ++y) {
      const float* r0 = s + ty[y].i0 * w;
      const float* r1 = s + ty[y].i1 * w;
      for (std::int64_t x = 0; x < width; ++x) {
        const float top = r0[tx[x].i0] + tx[x].f * (r0[tx[x].i1] - r0[tx[x].i0]);
        const float bot = r1[tx[x].i0] + tx[x].f * (r1[tx[x].i1] - r1[tx[x].i0]);
        d[y * width + x] = top + ty[y].f * (bot - top);
      }
    }
  }
  return Tensor<float>(Shape{c, height, width}, std::move(out));
}

namespace {

Tensor<float> resize_shorter(const Tensor<float>& image, int resize_to) {
  const std::int64_t h = image.dim(1), w = image.dim(2);
  const std::int64_t shorter = std::min(h, w);
  auto scaled = [&](std::int64_t n) {
    return n == shorter ? std::int64_t{resize_to}
                        : static_cast<std::int64_t>(std::llround(static_cast<double>(n) * resize_to / shorter));
  };
  return resize_bilinear(image, scaled(h), scaled(w));
}

Tensor<float> random_crop(const Tensor<float>& image, int crop_to, std::mt19937_64& rng) {
  const std::int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (crop_to > h || crop_to > w) throw UsageError("crop larger than the resized image");
  const auto oy = std::uniform_int_distribution<std::int64_t>(0, h - crop_to)(rng);
  const auto ox = std::uniform_int_distribution<std::int64_t>(0, w - crop_to)(rng);
  auto src = image.data();
  std::vector<float> out(static_cast<std::size_t>(c * crop_to * crop_to));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < crop_to; ++y) {
      std::copy_n(src.data() + (ch * h + oy + y) * w + ox, crop_to, out.data() + (ch * crop_to + y) * crop_to);
    }
  }
  return Tensor<float>(Shape{c, crop_to, crop_to}, std::move(out));
}

void check_sizes(int resize_to, int crop_to) {
  if (crop_to < 1 || resize_to < 1) throw UsageError("resize and crop sizes must be positive");
  if (crop_to > resize_to) throw UsageError("crop size exceeds resize target");
}

}  // namespace

Tensor<float> preprocess(const Tensor<float>& image, int resize_to, int crop_to, std::mt19937_64& rng) {
  check_sizes(resize_to, crop_to);
  if (image.rank() != 3 || image.dim(1) < 1 || image.dim(2) < 1) throw UsageError("preprocess expects a 3×H×W image");
  return random_crop(resize_shorter(image, resize_to), crop_to, rng);
}

ImageDataset::ImageDataset(const std::string& dir, int resize_to) : paths_(list_images(dir)), resize_to_(resize_to) {
  if (paths_.empty()) throw ConfigError("no PNG/JPEG images in " + dir);
  cache_.resize(paths_.size());
}

const Tensor<float>& ImageDataset::resized(std::size_t i) {
  if (!cache_.at(i).defined()) cache_[i] = resize_shorter(image_read(paths_[i]), resize_to_);
  return cache_[i];
}

Tensor<float> ImageDataset::sample(std::size_t i, int crop_to, std::mt19937_64& rng) {
  check_sizes(resize_to_, crop_to);
  return random_crop(resized(i), crop_to, rng);
}

}  // namespace ufse
