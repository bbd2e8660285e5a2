#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ufse/netgraph.hpp"
#include "ufse/tensor.hpp"

namespace ufse {

// Everything one trained network leaves behind. The loss network is only
// needed for evaluation (prune sweeps, analysis), not for stylization.
struct StyleNetwork {
  Network encoder;
  Network decoder;
  Network loss_net;
};

// A checkpoint directory holds encoder.ufse, decoder.ufse, lossnet.ufse and
// network.json (the tap configuration).
void save_style_network(const std::string& dir, const StyleNetwork& net);
StyleNetwork load_style_network(const std::string& dir);

struct StylizeOptions {
  double alpha = 1.0;
  // Keep the largest-magnitude channels holding this fraction of the total
  // magnitude of the transformed feature; zero the rest.
  std::optional<double> prune_fraction;
};

// Mirror-pads the two trailing axes of a 3×H×W / N×C×H×W tensor so both become
// multiples of `multiple`, and the inverse crop.
Tensor<float> reflect_pad_to(const Tensor<float>& image, std::int64_t multiple);
Tensor<float> crop_to(const Tensor<float>& image, std::int64_t height, std::int64_t width);

// Transformed content-tap feature (AdaIN, blended by alpha, optionally pruned),
// 1×C×h×w. Inputs must already be stride-aligned.
Tensor<float> transfer_features(const StyleNetwork& net, const Tensor<float>& content, const Tensor<float>& style,
                                const StylizeOptions& options);

// Returns a 3×H×W image at the content's resolution, unclamped.
Tensor<float> stylize(const StyleNetwork& net, const Tensor<float>& content, const Tensor<float>& style,
                      const StylizeOptions& options = {});

// Feeds each stage's output to the next as content. `stages` receives every
// intermediate output when given.
Tensor<float> stylize_cascade(const std::vector<StyleNetwork>& nets, const Tensor<float>& content,
                              const Tensor<float>& style, const StylizeOptions& options = {},
                              std::vector<Tensor<float>>* stages = nullptr);

}  // namespace ufse
