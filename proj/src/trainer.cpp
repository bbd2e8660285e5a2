#include "ufse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "config_json.hpp"
#include "ufse/dataset.hpp"
#include "ufse/featstats.hpp"
#include "ufse/ops.hpp"
#include "ufse/optim.hpp"
#include "ufse/transform.hpp"

namespace ufse {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (epochs == 0 && iterations < 1) throw ConfigError("iterations must be >= 1 when epochs is 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr_decoder > 0) || !(lr_encoder > 0)) throw ConfigError("learning rates must be positive");
  if (weights.content < 0 || weights.style < 0 || weights.uncorrelation < 0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (crop < 1 || resize < 1) throw ConfigError("crop and resize must be positive");
  if (crop > resize) throw ConfigError("crop (" + std::to_string(crop) + ") exceeds resize (" + std::to_string(resize) + ")");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  network.validate();
  if (crop % network.downsampling_factor() != 0) {
    throw ConfigError("crop must be a multiple of " + std::to_string(network.downsampling_factor()));
  }
  if (content_dir.empty() || style_dir.empty()) throw ConfigError("content_dir and style_dir are required");
}

TrainConfig train_config_from_json(const std::string& text) {
  TrainConfig cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    reject_unknown_keys(j,
                        {"epochs", "iterations", "batch_size", "lr_decoder", "lr_encoder", "weights",
                         "uncorrelation_mode", "crop", "resize", "seed", "content_dir", "style_dir", "output_dir",
                         "log_every", "network", "encoder_init"},
                        "train config");
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("epochs", cfg.epochs);
    get("iterations", cfg.iterations);
    get("batch_size", cfg.batch_size);
    get("lr_decoder", cfg.lr_decoder);
    get("lr_encoder", cfg.lr_encoder);
    get("weights", cfg.weights);
    if (j.contains("uncorrelation_mode")) {
      cfg.uncorrelation_mode = parse_uncorrelation_mode(j.at("uncorrelation_mode").get<std::string>());
    }
    get("crop", cfg.crop);
    get("resize", cfg.resize);
    get("seed", cfg.seed);
    get("content_dir", cfg.content_dir);
    get("style_dir", cfg.style_dir);
    get("output_dir", cfg.output_dir);
    get("log_every", cfg.log_every);
    get("network", cfg.network);
    get("encoder_init", cfg.encoder_init);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

std::string to_json(const TrainConfig& cfg) {
  const nlohmann::json j = {{"epochs", cfg.epochs},
                            {"iterations", cfg.iterations},
                            {"batch_size", cfg.batch_size},
                            {"lr_decoder", cfg.lr_decoder},
                            {"lr_encoder", cfg.lr_encoder},
                            {"weights", cfg.weights},
                            {"uncorrelation_mode", to_string(cfg.uncorrelation_mode)},
                            {"crop", cfg.crop},
                            {"resize", cfg.resize},
                            {"seed", cfg.seed},
                            {"content_dir", cfg.content_dir},
                            {"style_dir", cfg.style_dir},
                            {"output_dir", cfg.output_dir},
                            {"log_every", cfg.log_every},
                            {"network", cfg.network},
                            {"encoder_init", cfg.encoder_init}};
  return j.dump(2);
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return train_config_from_json(ss.str());
}

namespace {

// Seeded, reshuffled-every-pass stream of indices into a dataset.
class Shuffler {
 public:
  Shuffler(std::size_t n, std::mt19937_64& rng) : order_(n), rng_(rng) { std::iota(order_.begin(), order_.end(), 0); }

  std::size_t next() {
    if (pos_ == 0) std::shuffle(order_.begin(), order_.end(), rng_);
    const std::size_t v = order_[pos_];
    pos_ = (pos_ + 1) % order_.size();
    return v;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64& rng_;
  std::size_t pos_ = 0;
};

struct ItemLosses {
  double content = 0, style = 0, uncorrelation = 0;
};

// Forward and backward for one (content, style) pair; gradients accumulate
// into the parameters scaled by 1/batch.
ItemLosses train_item(const StyleNetwork& net, const TrainConfig& cfg, const Tensor<float>& content,
                      const Tensor<float>& style, int batch) {
  const auto& ncfg = net.encoder.config();
  FeatureSet content_targets, style_targets;
  {
    NoGradGuard no_grad;
    content_targets = encode(net.loss_net, content);
    style_targets = encode(net.loss_net, style);
  }
  const Tensor<float> fc = encode_content(net.encoder, content);
  const Tensor<float> fs = encode_content(net.encoder, style);
  const Tensor<float> out = decode(net.decoder, adain(fc, fs));
  const FeatureSet out_taps = encode(net.loss_net, out);

  const Tensor<float> lc = content_loss(out_taps.at(ncfg.content_tap), content_targets.at(ncfg.content_tap));
  const Tensor<float> ls = style_loss(out_taps, style_targets, ncfg.style_taps);
  const Tensor<float> lr = uncorrelation_loss(fc, fs, cfg.uncorrelation_mode);
  const Tensor<float> total = total_loss(lc, ls, lr, cfg.weights);
  if (!std::isfinite(total.item())) {
    throw NumericalError("non-finite training loss (content " + std::to_string(lc.item()) + ", style " +
                         std::to_string(ls.item()) + ", uncorrelation " + std::to_string(lr.item()) + ")");
  }
  backward(mul_scalar(total, 1.0f / static_cast<float>(batch)));
  return {lc.item(), ls.item(), lr.item()};
}

void write_outputs(const TrainConfig& cfg, const StyleNetwork& net, const std::vector<LossReport>& history) {
  if (cfg.output_dir.empty()) return;
  save_style_network(cfg.output_dir, net);
  write_loss_history((fs::path(cfg.output_dir) / "history.csv").string(), history);
  std::ofstream out(fs::path(cfg.output_dir) / "config.json");
  out << to_json(cfg) << "\n";
  if (!out) throw IoError("cannot write config.json in " + cfg.output_dir);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  ImageDataset contents(cfg.content_dir, cfg.resize);
  ImageDataset styles(cfg.style_dir, cfg.resize);

  StyleNetwork net;
  if (cfg.encoder_init.empty()) {
    net.encoder = build_encoder(cfg.network, cfg.seed);
  } else {
    net.encoder = load_network(cfg.encoder_init, NetworkRole::Encoder, cfg.network);
  }
  net.decoder = build_decoder(net.encoder.config(), cfg.seed + 1);
  net.loss_net = snapshot_frozen(net.encoder);

  const std::int64_t iterations =
      cfg.epochs > 0 ? static_cast<std::int64_t>(cfg.epochs) *
                           ((static_cast<std::int64_t>(contents.size()) + cfg.batch_size - 1) / cfg.batch_size)
                     : cfg.iterations;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  Shuffler content_order(contents.size(), rng);
  Shuffler style_order(styles.size(), rng);
  Adam enc_opt(net.encoder.parameters(), cfg.lr_encoder);
  Adam dec_opt(net.decoder.parameters(), cfg.lr_decoder);

  TrainResult result;
  StyleNetwork last_good{net.encoder.clone(), net.decoder.clone(), net.loss_net};
  for (std::int64_t it = 0; it < iterations; ++it) {
    enc_opt.zero_grad();
    dec_opt.zero_grad();
    ItemLosses sum;
    StyleNetwork current{net.encoder.clone(), net.decoder.clone(), net.loss_net};
    try {
      for (int b = 0; b < cfg.batch_size; ++b) {
        const Tensor<float> c = contents.sample(content_order.next(), cfg.crop, rng);
        const Tensor<float> s = styles.sample(style_order.next(), cfg.crop, rng);
        const Shape batch_shape{1, c.dim(0), c.dim(1), c.dim(2)};
        const ItemLosses l = train_item(net, cfg, reshape(c, batch_shape), reshape(s, batch_shape), cfg.batch_size);
        sum.content += l.content;
        sum.style += l.style;
        sum.uncorrelation += l.uncorrelation;
      }
      enc_opt.step();
      dec_opt.step();
    } catch (const NumericalError& e) {
      // The current parameters produced the failure; the previous iterate is
      // the last one with a finite loss.
      write_outputs(cfg, last_good, result.history);
      throw NumericalError("training aborted at iteration " + std::to_string(it) + ": " + e.what() +
                           (cfg.output_dir.empty() ? "" : "; last good checkpoint saved to " + cfg.output_dir));
    }
    LossReport r;
    r.iteration = it;
    r.content = sum.content / cfg.batch_size;
    r.style = sum.style / cfg.batch_size;
    r.uncorrelation = sum.uncorrelation / cfg.batch_size;
    r.total = total_loss(r.content, r.style, r.uncorrelation, cfg.weights);
    result.history.push_back(r);
    if (progress && (it % cfg.log_every == 0 || it + 1 == iterations)) progress(r);
    last_good = std::move(current);
  }
  // Gradient buffers are dead weight in the returned networks.
  for (auto& p : net.encoder.parameters()) p.clear_grad();
  for (auto& p : net.decoder.parameters()) p.clear_grad();
  write_outputs(cfg, net, result.history);
  result.net = std::move(net);
  return result;
}

std::vector<TrainResult> train_cascade(const std::vector<TrainConfig>& cfgs, const ProgressFn& progress) {
  if (cfgs.empty()) throw ConfigError("cascade needs at least one stage");
  for (std::size_t i = 1; i < cfgs.size(); ++i) {
    if (cfgs[i].network.style_taps.size() <= cfgs[i - 1].network.style_taps.size()) {
      throw ConfigError("cascade stage " + std::to_string(i + 1) + " must use more style taps than stage " +
                        std::to_string(i));
    }
  }
  for (const auto& c : cfgs) c.validate();
  std::vector<TrainResult> out;
  for (const auto& c : cfgs) out.push_back(train(c, progress));
  return out;
}

ProbeStats probe_statistics(const Network& encoder, const std::vector<Tensor<float>>& contents,
                            const std::vector<Tensor<float>>& styles) {
  if (contents.empty() || contents.size() != styles.size()) {
    throw UsageError("probe statistics need equally many (non-zero) content and style images");
  }
  NoGradGuard no_grad;
  ProbeStats stats;
  const double n = static_cast<double>(contents.size());
  for (std::size_t i = 0; i < contents.size(); ++i) {
    const FeatureMap fc = FeatureMap::from_tensor(encode_content(encoder, contents[i]));
    const FeatureMap fs = FeatureMap::from_tensor(encode_content(encoder, styles[i]));
    stats.mean_abs_off_diagonal +=
        0.5 * (channel_correlation(fc).mean_abs_off_diagonal() + channel_correlation(fs).mean_abs_off_diagonal()) / n;
    stats.diagonal_sum += normalized_diagonal_sum(fc, fs) / n;
  }
  return stats;
}

}  // namespace ufse
