#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ufse/checkpoint.hpp"
#include "ufse/feature_set.hpp"
#include "ufse/tensor.hpp"

namespace ufse {

/// VGG-style architecture description. Tap tags follow relu{block}_{conv},
/// both 1-based; the content tap must be the deepest tap.
struct NetworkConfig {
  std::vector<int> widths{16, 32, 64};
  int convs_per_block = 2;
  int kernel = 3;
  std::string content_tap = "relu3_2";
  std::vector<std::string> style_taps{"relu1_2", "relu2_2", "relu3_2"};
  int input_channels = 3;

  void validate() const;
  // Number of blocks the encoder actually builds (up to the content tap).
  int blocks_used() const;
  // Accumulated stride at the content tap.
  std::int64_t downsampling_factor() const;
  // Every tap encode() reports: the style taps plus the content tap.
  std::vector<std::string> tap_tags() const;
};

struct TapPosition {
  int block = 0;
  int conv = 0;
};

TapPosition parse_tap(const std::string& tag);
std::string tap_tag(int block, int conv);

enum class NetworkRole { Encoder, Decoder };

std::string to_string(NetworkRole role);

struct Layer {
  enum class Kind { Conv, Relu, MaxPool, Upsample };
  Kind kind = Kind::Relu;
  std::string name;  // conv layers: "conv2_1" (encoder) or "dec2_1" (decoder); relu: its tap tag
  Tensor<float> weight;
  Tensor<float> bias;
};

class Network {
 public:
  Network() = default;
  Network(NetworkRole role, NetworkConfig config, std::vector<Layer> layers);

  NetworkRole role() const { return role_; }
  const NetworkConfig& config() const { return config_; }
  void set_style_taps(std::vector<std::string> taps);
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  bool frozen() const { return frozen_; }
  void set_frozen(bool frozen);

  // Weight and bias tensors of every conv, in layer order.
  std::vector<Tensor<float>> parameters() const;
  std::int64_t parameter_count() const;
  std::int64_t input_channels() const;
  std::int64_t output_channels() const;

  // Runs every layer. When `taps` is given, records relu outputs whose tag is
  // in `tap_tags` (all relus if empty).
  Tensor<float> forward(const Tensor<float>& input, FeatureSet* taps = nullptr,
                        const std::vector<std::string>& tap_tags = {}) const;

  // Deep copy of every parameter.
  Network clone() const;

 private:
  NetworkRole role_ = NetworkRole::Encoder;
  NetworkConfig config_;
  std::vector<Layer> layers_;
  bool frozen_ = false;
};

Network build_encoder(const NetworkConfig& cfg, std::uint64_t seed);
Network build_decoder(const NetworkConfig& cfg, std::uint64_t seed);

// Tagged features at every tap of cfg (style taps and content tap).
// `image` is 3×H×W or N×3×H×W with H, W divisible by the downsampling factor.
FeatureSet encode(const Network& encoder, const Tensor<float>& image);
// Content-tap feature only.
Tensor<float> encode_content(const Network& encoder, const Tensor<float>& image);
Tensor<float> decode(const Network& decoder, const Tensor<float>& features);

// Deep copy with the frozen flag set.
Network snapshot_frozen(const Network& net);

Checkpoint to_checkpoint(const Network& net);
// Rebuilds a network from its tensor table; the architecture is read off the
// tensor shapes. `taps` overrides the inferred content/style taps.
Network network_from_checkpoint(const Checkpoint& ckpt, NetworkRole role,
                                const std::optional<NetworkConfig>& taps = std::nullopt);

void save_network(const std::string& path, const Network& net);
Network load_network(const std::string& path, NetworkRole role,
                     const std::optional<NetworkConfig>& taps = std::nullopt);

}  // namespace ufse
