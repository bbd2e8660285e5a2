#include "ufse/netgraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include "ufse/ops.hpp"

namespace ufse {

TapPosition parse_tap(const std::string& tag) {
  TapPosition pos;
  char tail = 0;
  if (std::sscanf(tag.c_str(), "relu%d_%d%c", &pos.block, &pos.conv, &tail) != 2 || pos.block < 1 || pos.conv < 1) {
    throw ConfigError("malformed tap tag '" + tag + "' (expected relu<block>_<conv>)");
  }
  return pos;
}

std::string tap_tag(int block, int conv) { return "relu" + std::to_string(block) + "_" + std::to_string(conv); }

std::string to_string(NetworkRole role) { return role == NetworkRole::Encoder ? "encoder" : "decoder"; }

namespace {

bool deeper(const TapPosition& a, const TapPosition& b) {
  return a.block > b.block || (a.block == b.block && a.conv > b.conv);
}

std::string conv_name(NetworkRole role, int block, int conv) {
  return (role == NetworkRole::Encoder ? "conv" : "dec") + std::to_string(block) + "_" + std::to_string(conv);
}

Tensor<float> he_normal(std::int64_t cout, std::int64_t cin, std::int64_t k, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(cin * k * k)));
  std::vector<float> w(static_cast<std::size_t>(cout * cin * k * k));
  for (auto& v : w) v = static_cast<float>(normal(rng));
  return Tensor<float>(Shape{cout, cin, k, k}, std::move(w), true);
}

Layer conv_layer(std::string name, std::int64_t cin, std::int64_t cout, std::int64_t k, std::mt19937_64& rng) {
  Layer l;
  l.kind = Layer::Kind::Conv;
  l.name = std::move(name);
  l.weight = he_normal(cout, cin, k, rng);
  l.bias = Tensor<float>::zeros(Shape{cout}, true);
  return l;
}

Layer simple_layer(Layer::Kind kind, std::string name = {}) {
  Layer l;
  l.kind = kind;
  l.name = std::move(name);
  return l;
}

// Conv channel plan (block, conv, in, out) up to and including the content tap.
struct ConvSpec {
  int block, conv;
  std::int64_t in, out;
};

std::vector<ConvSpec> conv_plan(const NetworkConfig& cfg) {
  const TapPosition last = parse_tap(cfg.content_tap);
  std::vector<ConvSpec> plan;
  std::int64_t in = cfg.input_channels;
  for (int b = 1; b <= last.block; ++b) {
    const int convs = b == last.block ? last.conv : cfg.convs_per_block;
    for (int k = 1; k <= convs; ++k) {
      plan.push_back({b, k, in, cfg.widths[b - 1]});
      in = cfg.widths[b - 1];
    }
  }
  return plan;
}

}  // namespace

void NetworkConfig::validate() const {
  if (widths.empty()) throw ConfigError("network needs at least one block");
  for (int w : widths) {
    if (w < 1) throw ConfigError("block widths must be positive");
  }
  if (convs_per_block < 1) throw ConfigError("convs_per_block must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel size must be odd and positive");
  if (input_channels < 1) throw ConfigError("input_channels must be positive");
  const TapPosition content = parse_tap(content_tap);
  auto check_range = [&](const std::string& tag, const TapPosition& p) {
    if (p.block > static_cast<int>(widths.size()) || p.conv > convs_per_block) {
      throw ConfigError("tap '" + tag + "' is outside the configured network");
    }
  };
  check_range(content_tap, content);
  if (style_taps.empty()) throw ConfigError("at least one style tap is required");
  for (const auto& tag : style_taps) {
    const TapPosition p = parse_tap(tag);
    check_range(tag, p);
    if (deeper(p, content)) {
      throw ConfigError("content tap '" + content_tap + "' must be at least as deep as style tap '" + tag + "'");
    }
  }
}

int NetworkConfig::blocks_used() const { return parse_tap(content_tap).block; }

std::int64_t NetworkConfig::downsampling_factor() const { return std::int64_t{1} << (blocks_used() - 1); }

std::vector<std::string> NetworkConfig::tap_tags() const {
  std::vector<std::string> tags = style_taps;
  if (std::find(tags.begin(), tags.end(), content_tap) == tags.end()) tags.push_back(content_tap);
  std::sort(tags.begin(), tags.end(), [](const std::string& a, const std::string& b) {
    return deeper(parse_tap(b), parse_tap(a));
  });
  return tags;
}

Network::Network(NetworkRole role, NetworkConfig config, std::vector<Layer> layers)
    : role_(role), config_(std::move(config)), layers_(std::move(layers)) {}

void Network::set_style_taps(std::vector<std::string> taps) {
  NetworkConfig next = config_;
  next.style_taps = std::move(taps);
  next.validate();
  config_ = std::move(next);
}

void Network::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (auto& p : parameters()) p.set_requires_grad(!frozen);
}

std::vector<Tensor<float>> Network::parameters() const {
  std::vector<Tensor<float>> out;
  for (const auto& l : layers_) {
    if (l.kind != Layer::Kind::Conv) continue;
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

std::int64_t Network::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

std::int64_t Network::input_channels() const {
  for (const auto& l : layers_) {
    if (l.kind == Layer::Kind::Conv) return l.weight.dim(1);
  }
  return 0;
}

std::int64_t Network::output_channels() const {
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    if (it->kind == Layer::Kind::Conv) return it->weight.dim(0);
  }
  return 0;
}

Tensor<float> Network::forward(const Tensor<float>& input, FeatureSet* taps,
                               const std::vector<std::string>& tap_tags) const {
  Tensor<float> x = input;
  for (const auto& l : layers_) {
    switch (l.kind) {
      case Layer::Kind::Conv:
        x = conv2d(x, l.weight, l.bias, 1, static_cast<int>(l.weight.dim(2) / 2));
        break;
      case Layer::Kind::Relu:
        x = relu(x);
        if (taps && (tap_tags.empty() || std::find(tap_tags.begin(), tap_tags.end(), l.name) != tap_tags.end())) {
          taps->add(l.name, x);
        }
        break;
      case Layer::Kind::MaxPool:
        x = maxpool_2x(x);
        break;
      case Layer::Kind::Upsample:
        x = upsample_nearest_2x(x);
        break;
    }
  }
  return x;
}

Network Network::clone() const {
  Network copy = *this;
  for (auto& l : copy.layers_) {
    if (l.kind != Layer::Kind::Conv) continue;
    l.weight = l.weight.clone();
    l.bias = l.bias.clone();
    l.weight.set_requires_grad(!frozen_);
    l.bias.set_requires_grad(!frozen_);
  }
  return copy;
}

Network build_encoder(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  int current_block = 1;
  for (const auto& spec : conv_plan(cfg)) {
    if (spec.block != current_block) {
      layers.push_back(simple_layer(Layer::Kind::MaxPool));
      current_block = spec.block;
    }
    layers.push_back(conv_layer(conv_name(NetworkRole::Encoder, spec.block, spec.conv), spec.in, spec.out, cfg.kernel, rng));
    layers.push_back(simple_layer(Layer::Kind::Relu, tap_tag(spec.block, spec.conv)));
  }
  return Network(NetworkRole::Encoder, cfg, std::move(layers));
}

Network build_decoder(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  auto plan = conv_plan(cfg);
  std::vector<Layer> layers;
  for (std::size_t i = plan.size(); i-- > 0;) {
    const auto& spec = plan[i];
    layers.push_back(conv_layer(conv_name(NetworkRole::Decoder, spec.block, spec.conv), spec.out, spec.in, cfg.kernel, rng));
    if (i == 0) break;
    layers.push_back(simple_layer(Layer::Kind::Relu, "dec_" + tap_tag(spec.block, spec.conv)));
    if (plan[i - 1].block != spec.block) layers.push_back(simple_layer(Layer::Kind::Upsample));
  }
  return Network(NetworkRole::Decoder, cfg, std::move(layers));
}

namespace {

Tensor<float> as_batch(const Tensor<float>& image) {
  if (image.rank() == 4) return image;
  if (image.rank() == 3) return reshape(image, Shape{1, image.dim(0), image.dim(1), image.dim(2)});
  throw UsageError("expected a C×H×W or N×C×H×W image, got " + shape_string(image.dims()));
}

void check_encoder_input(const Network& encoder, const Tensor<float>& batch) {
  if (encoder.role() != NetworkRole::Encoder) throw UsageError("encode requires an encoder network");
  if (batch.dim(1) != encoder.input_channels()) {
    throw UsageError("encoder expects " + std::to_string(encoder.input_channels()) + " input channels, got " +
                     shape_string(batch.dims()));
  }
  const std::int64_t f = encoder.config().downsampling_factor();
  if (batch.dim(2) % f != 0 || batch.dim(3) % f != 0) {
    throw UsageError("image size " + std::to_string(batch.dim(3)) + "x" + std::to_string(batch.dim(2)) +
                     " is not a multiple of " + std::to_string(f) + " (the encoder's downsampling factor)");
  }
}

}  // namespace

FeatureSet encode(const Network& encoder, const Tensor<float>& image) {
  Tensor<float> batch = as_batch(image);
  check_encoder_input(encoder, batch);
  FeatureSet taps;
  encoder.forward(batch, &taps, encoder.config().tap_tags());
  return taps;
}

Tensor<float> encode_content(const Network& encoder, const Tensor<float>& image) {
  Tensor<float> batch = as_batch(image);
  check_encoder_input(encoder, batch);
  return encoder.forward(batch);
}

Tensor<float> decode(const Network& decoder, const Tensor<float>& features) {
  if (decoder.role() != NetworkRole::Decoder) throw UsageError("decode requires a decoder network");
  Tensor<float> batch = as_batch(features);
  if (batch.dim(1) != decoder.input_channels()) {
    throw UsageError("decoder expects " + std::to_string(decoder.input_channels()) + " feature channels, got " +
                     shape_string(batch.dims()));
  }
  return decoder.forward(batch);
}

Network snapshot_frozen(const Network& net) {
  Network copy = net.clone();
  copy.set_frozen(true);
  return copy;
}

Checkpoint to_checkpoint(const Network& net) {
  Checkpoint ckpt;
  for (const auto& l : net.layers()) {
    if (l.kind != Layer::Kind::Conv) continue;
    auto w = l.weight.data();
    auto b = l.bias.data();
    ckpt.tensors.push_back({l.name + ".weight", l.weight.dims(), std::vector<float>(w.begin(), w.end())});
    ckpt.tensors.push_back({l.name + ".bias", l.bias.dims(), std::vector<float>(b.begin(), b.end())});
  }
  return ckpt;
}

Network network_from_checkpoint(const Checkpoint& ckpt, NetworkRole role, const std::optional<NetworkConfig>& taps) {
  const std::string prefix = role == NetworkRole::Encoder ? "conv" : "dec";
  struct Entry {
    const NamedTensor* weight = nullptr;
    const NamedTensor* bias = nullptr;
  };
  std::map<std::pair<int, int>, Entry> convs;
  for (const auto& t : ckpt.tensors) {
    int b = 0, k = 0;
    char field[16] = {};
    const std::string pattern = prefix + "%d_%d.%15s";
    if (std::sscanf(t.name.c_str(), pattern.c_str(), &b, &k, field) != 3 || b < 1 || k < 1) {
      throw IoError("unexpected tensor '" + t.name + "' in " + to_string(role) + " checkpoint");
    }
    auto& e = convs[{b, k}];
    if (std::string(field) == "weight") {
      e.weight = &t;
    } else if (std::string(field) == "bias") {
      e.bias = &t;
    } else {
      throw IoError("unexpected tensor '" + t.name + "' in " + to_string(role) + " checkpoint");
    }
  }
  if (convs.empty()) throw IoError(to_string(role) + " checkpoint holds no conv layers");

  NetworkConfig cfg;
  cfg.widths.clear();
  cfg.convs_per_block = 0;
  int last_block = 0, last_conv = 0;
  for (const auto& [pos, e] : convs) {
    if (!e.weight || !e.bias || e.weight->dims.size() != 4 || e.bias->dims.size() != 1) {
      throw IoError("incomplete conv layer " + prefix + std::to_string(pos.first) + "_" + std::to_string(pos.second));
    }
    if (pos.first != last_block) {
      if (pos.first != last_block + 1 || pos.second != 1) throw IoError("conv layers in checkpoint are not contiguous");
      cfg.widths.push_back(0);
    } else if (pos.second != last_conv + 1) {
      throw IoError("conv layers in checkpoint are not contiguous");
    }
    last_block = pos.first;
    last_conv = pos.second;
    cfg.convs_per_block = std::max(cfg.convs_per_block, pos.second);
    const auto& d = e.weight->dims;
    cfg.kernel = static_cast<int>(d[2]);
    // Encoder weights are out×in, decoder weights mirror them as in×out.
    cfg.widths.back() = static_cast<int>(role == NetworkRole::Encoder ? d[0] : d[1]);
  }
  const auto& first = convs.begin()->second.weight->dims;
  cfg.input_channels = static_cast<int>(role == NetworkRole::Encoder ? first[1] : first[0]);
  cfg.content_tap = tap_tag(last_block, last_conv);
  cfg.style_taps.clear();
  for (int b = 1; b <= last_block; ++b) {
    cfg.style_taps.push_back(tap_tag(b, b == last_block ? last_conv : cfg.convs_per_block));
  }
  if (taps) {
    cfg.content_tap = taps->content_tap;
    cfg.style_taps = taps->style_taps;
  }
  cfg.validate();

  auto to_tensor = [](const NamedTensor& t) { return Tensor<float>(t.dims, t.data, true); };
  std::vector<Layer> layers;
  auto make_conv = [&](const std::pair<int, int>& pos, const Entry& e) {
    Layer l;
    l.kind = Layer::Kind::Conv;
    l.name = prefix + std::to_string(pos.first) + "_" + std::to_string(pos.second);
    l.weight = to_tensor(*e.weight);
    l.bias = to_tensor(*e.bias);
    if (l.bias.dim(0) != l.weight.dim(0)) throw IoError("bias/weight mismatch in " + l.name);
    return l;
  };
  if (role == NetworkRole::Encoder) {
    int block = 1;
    for (const auto& [pos, e] : convs) {
      if (pos.first != block) {
        layers.push_back(simple_layer(Layer::Kind::MaxPool));
        block = pos.first;
      }
      layers.push_back(make_conv(pos, e));
      layers.push_back(simple_layer(Layer::Kind::Relu, tap_tag(pos.first, pos.second)));
    }
  } else {
    for (auto it = convs.rbegin(); it != convs.rend(); ++it) {
      layers.push_back(make_conv(it->first, it->second));
      auto next = std::next(it);
      if (next == convs.rend()) break;
      layers.push_back(simple_layer(Layer::Kind::Relu, "dec_" + tap_tag(it->first.first, it->first.second)));
      if (next->first.first != it->first.first) layers.push_back(simple_layer(Layer::Kind::Upsample));
    }
  }
  // Adjacent convs must chain.
  std::int64_t channels = -1;
  for (const auto& l : layers) {
    if (l.kind != Layer::Kind::Conv) continue;
    if (channels >= 0 && l.weight.dim(1) != channels) throw IoError("conv channel chain broken at " + l.name);
    channels = l.weight.dim(0);
  }
  return Network(role, std::move(cfg), std::move(layers));
}

void save_network(const std::string& path, const Network& net) { save_checkpoint(path, to_checkpoint(net)); }

Network load_network(const std::string& path, NetworkRole role, const std::optional<NetworkConfig>& taps) {
  return network_from_checkpoint(load_checkpoint(path), role, taps);
}

}  // namespace ufse
