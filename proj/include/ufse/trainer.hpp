#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ufse/losses.hpp"
#include "ufse/netgraph.hpp"
#include "ufse/stylize.hpp"

namespace ufse {

struct TrainConfig {
  // When epochs > 0 it decides the run length (one epoch visits every content
  // image once); otherwise `iterations` does.
  int epochs = 0;
  int iterations = 2000;
  int batch_size = 4;
  double lr_decoder = 1e-3;
  double lr_encoder = 3e-5;
  LossWeights weights;
  UncorrelationMode uncorrelation_mode = UncorrelationMode::Absolute;
  int crop = 64;
  int resize = 80;
  std::uint64_t seed = 1;
  std::string content_dir;
  std::string style_dir;
  // Checkpoints, history.csv and config.json land here; empty keeps the run
  // in memory.
  std::string output_dir;
  int log_every = 50;
  NetworkConfig network;
  // Optional encoder checkpoint to start from instead of random weights; the
  // loss network is always a frozen copy of the starting encoder.
  std::string encoder_init;

  void validate() const;
};

TrainConfig train_config_from_json(const std::string& text);
std::string to_json(const TrainConfig& cfg);
TrainConfig load_train_config(const std::string& path);

struct TrainResult {
  StyleNetwork net;
  std::vector<LossReport> history;
};

using ProgressFn = std::function<void(const LossReport&)>;

TrainResult train(const TrainConfig& cfg, const ProgressFn& progress = {});

// Trains each config independently; style tap counts must strictly increase.
std::vector<TrainResult> train_cascade(const std::vector<TrainConfig>& cfgs, const ProgressFn& progress = {});

// Content-tap statistics of the (trainable) encoder over probe pairs.
struct ProbeStats {
  double mean_abs_off_diagonal = 0;  // over content and style correlation matrices
  double diagonal_sum = 0;           // normalized diagonal sum D
};

ProbeStats probe_statistics(const Network& encoder, const std::vector<Tensor<float>>& contents,
                            const std::vector<Tensor<float>>& styles);

}  // namespace ufse
