#include "ufse/stylize.hpp"

#include <filesystem>
#include <fstream>

#include "config_json.hpp"
#include "ufse/ops.hpp"
#include "ufse/prune.hpp"
#include "ufse/transform.hpp"

namespace ufse {

namespace fs = std::filesystem;

void save_style_network(const std::string& dir, const StyleNetwork& net) {
  fs::create_directories(dir);
  save_network((fs::path(dir) / "encoder.ufse").string(), net.encoder);
  save_network((fs::path(dir) / "decoder.ufse").string(), net.decoder);
  if (!net.loss_net.layers().empty()) save_network((fs::path(dir) / "lossnet.ufse").string(), net.loss_net);
  std::ofstream out(fs::path(dir) / "network.json");
  if (!out) throw IoError("cannot write " + (fs::path(dir) / "network.json").string());
  out << nlohmann::json(net.encoder.config()).dump(2) << "\n";
}

StyleNetwork load_style_network(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw IoError("checkpoint directory not found: " + dir);
  std::optional<NetworkConfig> taps;
  if (fs::exists(root / "network.json")) {
    std::ifstream in(root / "network.json");
    try {
      taps = nlohmann::json::parse(in).get<NetworkConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed " + (root / "network.json").string() + ": " + e.what());
    }
  }
  StyleNetwork net;
  net.encoder = load_network((root / "encoder.ufse").string(), NetworkRole::Encoder, taps);
  net.decoder = load_network((root / "decoder.ufse").string(), NetworkRole::Decoder, taps);
  if (fs::exists(root / "lossnet.ufse")) {
    net.loss_net = load_network((root / "lossnet.ufse").string(), NetworkRole::Encoder, taps);
    net.loss_net.set_frozen(true);
  }
  return net;
}

namespace {

// Mirror index without repeating the edge sample.
std::int64_t reflect(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  const std::int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Tensor<float> as_batch(const Tensor<float>& t) {
  if (t.rank() == 4) return t;
  if (t.rank() == 3) return reshape(t, Shape{1, t.dim(0), t.dim(1), t.dim(2)});
  throw UsageError("expected a C×H×W or N×C×H×W tensor, got " + shape_string(t.dims()));
}

Tensor<float> like_input(const Tensor<float>& batch, const Tensor<float>& reference) {
  return reference.rank() == 3 ? reshape(batch, Shape{batch.dim(1), batch.dim(2), batch.dim(3)}) : batch;
}

}  // namespace

Tensor<float> reflect_pad_to(const Tensor<float>& image, std::int64_t multiple) {
  const Tensor<float> x = as_batch(image);
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t ph = (h + multiple - 1) / multiple * multiple, pw = (w + multiple - 1) / multiple * multiple;
  if (ph == h && pw == w) return image;
  std::vector<float> out(static_cast<std::size_t>(n * c * ph * pw));
  auto src = x.data();
  for (std::int64_t plane = 0; plane < n * c; ++plane) {
    const float* s = src.data() + plane * h * w;
    float* d = out.data() + plane * ph * pw;
    for (std::int64_t y = 0; y < ph; ++y) {
      const std::int64_t sy = reflect(y, h);
      for (std::int64_t xx = 0; xx < pw; ++xx) d[y * pw + xx] = s[sy * w + reflect(xx, w)];
    }
  }
  return like_input(Tensor<float>(Shape{n, c, ph, pw}, std::move(out)), image);
}

Tensor<float> crop_to(const Tensor<float>& image, std::int64_t height, std::int64_t width) {
  const Tensor<float> x = as_batch(image);
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (height > h || width > w) throw UsageError("crop larger than the image");
  if (height == h && width == w) return image;
  std::vector<float> out(static_cast<std::size_t>(n * c * height * width));
  auto src = x.data();
  for (std::int64_t plane = 0; plane < n * c; ++plane) {
    for (std::int64_t y = 0; y < height; ++y) {
      std::copy_n(src.data() + (plane * h + y) * w, width, out.data() + (plane * height + y) * width);
    }
  }
  return like_input(Tensor<float>(Shape{n, c, height, width}, std::move(out)), image);
}

Tensor<float> transfer_features(const StyleNetwork& net, const Tensor<float>& content, const Tensor<float>& style,
                                const StylizeOptions& options) {
  NoGradGuard no_grad;
  const FeatureMap fc = FeatureMap::from_tensor(encode_content(net.encoder, content));
  const FeatureMap fs = FeatureMap::from_tensor(encode_content(net.encoder, style));
  FeatureMap t = blend(fc, adain(fc, fs), options.alpha);
  if (options.prune_fraction) {
    const auto mags = channel_magnitudes(t);
    double total = 0;
    for (double m : mags) total += m;
    // An all-zero feature has nothing left to eliminate.
    if (total > 0) t = zero_channels(t, complement(select_keep_fraction(mags, *options.prune_fraction), t.channels()));
  }
  return t.to_tensor();
}

Tensor<float> stylize(const StyleNetwork& net, const Tensor<float>& content, const Tensor<float>& style,
                      const StylizeOptions& options) {
  if (!(options.alpha >= 0.0 && options.alpha <= 1.0)) throw UsageError("alpha must lie in [0, 1]");
  if (options.prune_fraction && !(*options.prune_fraction > 0.0 && *options.prune_fraction <= 1.0)) {
    throw UsageError("prune fraction must lie in (0, 1]");
  }
  NoGradGuard no_grad;
  const Tensor<float> c = as_batch(content), s = as_batch(style);
  if (c.dim(0) != 1 || s.dim(0) != 1) throw UsageError("stylize takes one content and one style image");
  const std::int64_t f = net.encoder.config().downsampling_factor();
  const Tensor<float> t = transfer_features(net, reflect_pad_to(c, f), reflect_pad_to(s, f), options);
  const Tensor<float> out = crop_to(decode(net.decoder, t), c.dim(2), c.dim(3));
  return reshape(out, Shape{out.dim(1), out.dim(2), out.dim(3)});
}

Tensor<float> stylize_cascade(const std::vector<StyleNetwork>& nets, const Tensor<float>& content,
                              const Tensor<float>& style, const StylizeOptions& options,
                              std::vector<Tensor<float>>* stages) {
  if (nets.empty()) throw UsageError("cascade needs at least one network");
  Tensor<float> current = content;
  for (const auto& net : nets) {
    current = stylize(net, current, style, options);
    if (stages) stages->push_back(current);
  }
  return current;
}

}  // namespace ufse
