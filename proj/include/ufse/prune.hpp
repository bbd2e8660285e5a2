#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ufse/featstats.hpp"
#include "ufse/stylize.hpp"

namespace ufse {

// Smallest set of largest-magnitude channels whose magnitudes sum to at least
// fraction·total, returned sorted ascending. Equal magnitudes prefer the
// lower index.
std::vector<std::int64_t> select_keep_fraction(std::span<const double> magnitudes, double fraction = 0.8);

// Indices of [0, channels) not in `keep` (which must be sorted).
std::vector<std::int64_t> complement(const std::vector<std::int64_t>& keep, std::int64_t channels);

FeatureMap zero_channels(const FeatureMap& f, const std::vector<std::int64_t>& eliminate);
// Tensor form for N×C×H×W features; every batch item loses the same channels.
Tensor<float> zero_channels(const Tensor<float>& f, const std::vector<std::int64_t>& eliminate);

struct PruneStep {
  std::int64_t eliminated = 0;
  double style_loss = 0;
  double content_loss = 0;
};

struct PruneReport {
  std::vector<PruneStep> steps;  // strictly increasing elimination counts
  double fraction = 0.8;
  // Losses when each image keeps its own keep-fraction set; `eliminated` is
  // the mean number of channels removed, rounded.
  PruneStep keep_fraction;
  // Keep-set from magnitudes averaged over every pair (for structural export).
  std::vector<std::int64_t> keep_set;
  std::int64_t channels = 0;
};

struct PruneSweepOptions {
  std::vector<std::int64_t> steps;  // elimination counts; sorted and deduplicated
  double fraction = 0.8;
  // Decoded outputs of the first pair at every step, for an image grid.
  bool capture_images = false;
};

// Stylizes each (content[i], style[i]) pair with the smallest-magnitude
// channels of the transformed feature zeroed and measures style and content
// loss through the frozen loss network, averaged over pairs.
PruneReport prune_sweep(const StyleNetwork& net, const std::vector<Tensor<float>>& contents,
                        const std::vector<Tensor<float>>& styles, const PruneSweepOptions& options,
                        std::vector<Tensor<float>>* images = nullptr);

// Every elimination count from 0 to channels in `count` even increments.
std::vector<std::int64_t> even_steps(std::int64_t channels, std::int64_t count);

void write_prune_csv(const std::string& path, const PruneReport& report);

// Style and content loss of one stylized output against its inputs, through
// the loss network.
std::pair<double, double> evaluate_losses(const Network& loss_net, const Tensor<float>& output,
                                          const Tensor<float>& content, const Tensor<float>& style);

// Drops the encoder's output channels and the decoder's matching input slices
// for every channel outside `keep`.
StyleNetwork prune_structural(const StyleNetwork& net, const std::vector<std::int64_t>& keep);

}  // namespace ufse
