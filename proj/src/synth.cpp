#include "ufse/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "ufse/image.hpp"

namespace ufse {

namespace {

using Rgb = std::array<float, 3>;

Rgb random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  return {u(rng), u(rng), u(rng)};
}

void put(std::vector<float>& img, std::int64_t h, std::int64_t w, std::int64_t y, std::int64_t x, const Rgb& c,
         float a = 1.0f) {
  for (int ch = 0; ch < 3; ++ch) {
    float& v = img[(ch * h + y) * w + x];
    v = (1 - a) * v + a * c[ch];
  }
}

}  // namespace

Tensor<float> synth_content_image(std::int64_t height, std::int64_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> img(static_cast<std::size_t>(3 * height * width));
  const Rgb top = random_color(rng), bottom = random_color(rng);
  const float tilt = u(rng) - 0.5f;
  for (std::int64_t y = 0; y < height; ++y) {
    for (std::int64_t x = 0; x < width; ++x) {
      const float t = std::clamp(static_cast<float>(y) / height + tilt * (static_cast<float>(x) / width - 0.5f), 0.0f, 1.0f);
      Rgb c{};
      for (int ch = 0; ch < 3; ++ch) c[ch] = (1 - t) * top[ch] + t * bottom[ch];
      put(img, height, width, y, x, c);
    }
  }
  const int shapes = 2 + static_cast<int>(rng() % 4);
  for (int s = 0; s < shapes; ++s) {
    const Rgb c = random_color(rng);
    const float cy = u(rng) * height, cx = u(rng) * width;
    const float ry = (0.1f + 0.25f * u(rng)) * height, rx = (0.1f + 0.25f * u(rng)) * width;
    const bool ellipse = rng() % 2 == 0;
    for (std::int64_t y = 0; y < height; ++y) {
      for (std::int64_t x = 0; x < width; ++x) {
        const float dy = (y - cy) / ry, dx = (x - cx) / rx;
        const bool inside = ellipse ? dy * dy + dx * dx <= 1.0f : std::abs(dy) <= 1.0f && std::abs(dx) <= 1.0f;
        // Light shading keeps the shapes from being perfectly flat.
        if (inside) put(img, height, width, y, x, c, 0.85f + 0.15f * (1.0f - std::abs(dy)));
      }
    }
  }
  return Tensor<float>(Shape{3, height, width}, std::move(img));
}

Tensor<float> synth_style_image(std::int64_t height, std::int64_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::normal_distribution<float> noise(0.0f, 0.06f);
  const Rgb a = random_color(rng), b = random_color(rng), c = random_color(rng);
  const int kind = static_cast<int>(rng() % 3);
  const float angle = u(rng) * std::numbers::pi_v<float>;
  const float freq = 0.15f + 0.6f * u(rng);
  const float ca = std::cos(angle), sa = std::sin(angle);
  const float oy = u(rng) * height, ox = u(rng) * width;
  std::vector<float> img(static_cast<std::size_t>(3 * height * width));
  for (std::int64_t y = 0; y < height; ++y) {
    for (std::int64_t x = 0; x < width; ++x) {
      float t = 0;
      if (kind == 0) {
        t = 0.5f + 0.5f * std::sin(freq * (ca * x + sa * y));
      } else if (kind == 1) {
        const float p = std::sin(freq * (ca * x + sa * y)) * std::sin(freq * (-sa * x + ca * y));
        t = p > 0 ? 1.0f : 0.0f;
      } else {
        const float r = std::hypot(y - oy, x - ox);
        t = 0.5f + 0.5f * std::sin(freq * r);
      }
      const float mix = 0.5f + 0.5f * std::sin(0.05f * freq * (x + y));
      Rgb px{};
      for (int ch = 0; ch < 3; ++ch) {
        px[ch] = std::clamp((1 - t) * a[ch] + t * (mix * b[ch] + (1 - mix) * c[ch]) + noise(rng), 0.0f, 1.0f);
      }
      put(img, height, width, y, x, px);
    }
  }
  return Tensor<float>(Shape{3, height, width}, std::move(img));
}

void write_synth_dataset(const std::string& dir, int count, int min_side, std::uint64_t seed) {
  if (count < 1 || min_side < 1) throw UsageError("synth needs a positive count and size");
  namespace fs = std::filesystem;
  const fs::path content = fs::path(dir) / "content", style = fs::path(dir) / "style";
  fs::create_directories(content);
  fs::create_directories(style);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> extra(0, std::max(1, min_side / 4));
  char name[32];
  for (int i = 0; i < count; ++i) {
    std::snprintf(name, sizeof(name), "%05d.png", i);
    const bool portrait = rng() % 2 == 0;
    const std::int64_t h = min_side + (portrait ? extra(rng) : 0), w = min_side + (portrait ? 0 : extra(rng));
    image_write((content / name).string(), synth_content_image(h, w, rng()));
    image_write((style / name).string(), synth_style_image(w, h, rng()));
  }
}

}  // namespace ufse
