#include "ufse/prune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ufse/csv.hpp"
#include "ufse/losses.hpp"
#include "ufse/ops.hpp"

namespace ufse {

namespace {

// Channel indices by descending magnitude, lower index first on ties.
std::vector<std::int64_t> magnitude_order(std::span<const double> m) {
  std::vector<std::int64_t> order(m.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) { return m[a] > m[b]; });
  return order;
}

}  // namespace

std::vector<std::int64_t> select_keep_fraction(std::span<const double> magnitudes, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw UsageError("keep fraction must lie in (0, 1]");
  for (double m : magnitudes) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw UsageError("channel magnitudes must be finite and non-negative");
  }
  const auto order = magnitude_order(magnitudes);
  // Summing in the same order as the scan makes fraction = 1 land exactly on
  // the last non-zero channel.
  double total = 0;
  for (auto i : order) total += magnitudes[i];
  if (total == 0.0) throw UsageError("cannot select channels: every magnitude is zero");
  const double threshold = fraction * total;
  std::vector<std::int64_t> keep;
  double sum = 0;
  for (auto i : order) {
    keep.push_back(i);
    sum += magnitudes[i];
    if (sum >= threshold) break;
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::vector<std::int64_t> complement(const std::vector<std::int64_t>& keep, std::int64_t channels) {
  std::vector<std::int64_t> out;
  std::size_t k = 0;
  for (std::int64_t i = 0; i < channels; ++i) {
    if (k < keep.size() && keep[k] == i) {
      ++k;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

FeatureMap zero_channels(const FeatureMap& f, const std::vector<std::int64_t>& eliminate) {
  FeatureMap out = f;
  for (auto i : eliminate) {
    if (i < 0 || i >= f.channels()) {
      throw UsageError("channel index " + std::to_string(i) + " out of range for " + std::to_string(f.channels()) +
                       " channels");
    }
    auto ch = out.channel(i);
    std::fill(ch.begin(), ch.end(), 0.0f);
  }
  return out;
}

Tensor<float> zero_channels(const Tensor<float>& f, const std::vector<std::int64_t>& eliminate) {
  if (f.rank() != 4) throw UsageError("zero_channels expects an N×C×H×W tensor");
  const std::int64_t n = f.dim(0), c = f.dim(1), plane = f.dim(2) * f.dim(3);
  auto src = f.data();
  std::vector<float> out(src.begin(), src.end());
  for (auto i : eliminate) {
    if (i < 0 || i >= c) {
      throw UsageError("channel index " + std::to_string(i) + " out of range for " + std::to_string(c) + " channels");
    }
    for (std::int64_t b = 0; b < n; ++b) std::fill_n(out.begin() + (b * c + i) * plane, plane, 0.0f);
  }
  return Tensor<float>(f.dims(), std::move(out));
}

namespace {

struct Targets {
  FeatureSet content;
  FeatureSet style;
};

Targets loss_targets(const Network& loss_net, const Tensor<float>& content, const Tensor<float>& style) {
  const std::int64_t f = loss_net.config().downsampling_factor();
  return {encode(loss_net, reflect_pad_to(content, f)), encode(loss_net, reflect_pad_to(style, f))};
}

std::pair<double, double> losses_against(const Network& loss_net, const Tensor<float>& output, const Targets& t) {
  const auto& cfg = loss_net.config();
  const FeatureSet out = encode(loss_net, reflect_pad_to(output, cfg.downsampling_factor()));
  const double style = style_loss(out, t.style, cfg.style_taps).item();
  const double content = content_loss(out.at(cfg.content_tap), t.content.at(cfg.content_tap)).item();
  return {style, content};
}

}  // namespace

std::pair<double, double> evaluate_losses(const Network& loss_net, const Tensor<float>& output,
                                          const Tensor<float>& content, const Tensor<float>& style) {
  NoGradGuard no_grad;
  return losses_against(loss_net, output, loss_targets(loss_net, content, style));
}

PruneReport prune_sweep(const StyleNetwork& net, const std::vector<Tensor<float>>& contents,
                        const std::vector<Tensor<float>>& styles, const PruneSweepOptions& options,
                        std::vector<Tensor<float>>* images) {
  if (contents.empty() || contents.size() != styles.size()) {
    throw UsageError("prune_sweep needs equally many (non-zero) content and style images");
  }
  if (net.loss_net.layers().empty()) throw UsageError("prune_sweep needs a loss network");
  NoGradGuard no_grad;
  std::vector<std::int64_t> steps = options.steps;
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());

  PruneReport report;
  report.fraction = options.fraction;
  report.steps.resize(steps.size());
  for (std::size_t k = 0; k < steps.size(); ++k) report.steps[k].eliminated = steps[k];

  const std::int64_t stride = net.encoder.config().downsampling_factor();
  std::vector<double> mean_mags;
  double eliminated_at_fraction = 0;
  for (std::size_t p = 0; p < contents.size(); ++p) {
    const Tensor<float> content = reflect_pad_to(contents[p], stride);
    const Tensor<float> style = reflect_pad_to(styles[p], stride);
    const Targets targets = loss_targets(net.loss_net, content, style);
    const FeatureMap t = FeatureMap::from_tensor(transfer_features(net, content, style, {}));
    const std::int64_t c = t.channels();
    if (report.channels == 0) {
      report.channels = c;
      mean_mags.assign(static_cast<std::size_t>(c), 0.0);
    }
    for (auto s : steps) {
      if (s < 0 || s > c) throw UsageError("elimination count " + std::to_string(s) + " outside [0, " + std::to_string(c) + "]");
    }
    const auto mags = channel_magnitudes(t);
    for (std::int64_t i = 0; i < c; ++i) mean_mags[i] += mags[i] / static_cast<double>(contents.size());
    auto order = magnitude_order(mags);
    std::reverse(order.begin(), order.end());  // smallest magnitude first

    auto run = [&](const std::vector<std::int64_t>& eliminate) {
      const Tensor<float> out = decode(net.decoder, zero_channels(t, eliminate).to_tensor());
      return std::make_pair(losses_against(net.loss_net, out, targets), out);
    };
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const std::vector<std::int64_t> eliminate(order.begin(), order.begin() + steps[k]);
      auto [losses, out] = run(eliminate);
      report.steps[k].style_loss += losses.first / static_cast<double>(contents.size());
      report.steps[k].content_loss += losses.second / static_cast<double>(contents.size());
      if (images && options.capture_images && p == 0) images->push_back(out);
    }
    double total = 0;
    for (double m : mags) total += m;
    const auto eliminate =
        total > 0 ? complement(select_keep_fraction(mags, options.fraction), c) : std::vector<std::int64_t>{};
    auto [losses, out] = run(eliminate);
    report.keep_fraction.style_loss += losses.first / static_cast<double>(contents.size());
    report.keep_fraction.content_loss += losses.second / static_cast<double>(contents.size());
    eliminated_at_fraction += static_cast<double>(eliminate.size()) / static_cast<double>(contents.size());
  }
  report.keep_fraction.eliminated = std::llround(eliminated_at_fraction);
  double total = 0;
  for (double m : mean_mags) total += m;
  if (total > 0) {
    report.keep_set = select_keep_fraction(mean_mags, options.fraction);
  } else {
    report.keep_set.resize(static_cast<std::size_t>(report.channels));
    std::iota(report.keep_set.begin(), report.keep_set.end(), 0);
  }
  return report;
}

std::vector<std::int64_t> even_steps(std::int64_t channels, std::int64_t count) {
  if (channels < 1 || count < 1) throw UsageError("even_steps needs positive channel and step counts");
  std::vector<std::int64_t> out;
  for (std::int64_t k = 0; k <= count; ++k) {
    const std::int64_t s = (k * channels + count / 2) / count;
    if (out.empty() || out.back() != s) out.push_back(s);
  }
  return out;
}

void write_prune_csv(const std::string& path, const PruneReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "eliminated_count,style_loss,content_loss\n";
  for (const auto& s : report.steps) {
    out << s.eliminated << "," << csv::format(s.style_loss) << "," << csv::format(s.content_loss) << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

StyleNetwork prune_structural(const StyleNetwork& net, const std::vector<std::int64_t>& keep) {
  if (keep.empty()) throw UsageError("structural pruning must keep at least one channel");
  Checkpoint enc = to_checkpoint(net.encoder);
  Checkpoint dec = to_checkpoint(net.decoder);
  // Encoder tables end with the content-tap conv; decoder tables start with
  // its mirror.
  NamedTensor& ew = enc.tensors[enc.tensors.size() - 2];
  NamedTensor& eb = enc.tensors.back();
  NamedTensor& dw = dec.tensors.front();
  const std::int64_t c = ew.dims[0];
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] < 0 || keep[i] >= c || (i > 0 && keep[i] <= keep[i - 1])) {
      throw UsageError("keep-set must be sorted, unique and within [0, " + std::to_string(c) + ")");
    }
  }
  const std::int64_t k = static_cast<std::int64_t>(keep.size());
  const std::int64_t in_block = ew.dims[1] * ew.dims[2] * ew.dims[3];
  std::vector<float> w, b;
  for (auto i : keep) {
    w.insert(w.end(), ew.data.begin() + i * in_block, ew.data.begin() + (i + 1) * in_block);
    b.push_back(eb.data[i]);
  }
  ew.data = std::move(w);
  ew.dims[0] = k;
  eb.data = std::move(b);
  eb.dims[0] = k;

  const std::int64_t kk = dw.dims[2] * dw.dims[3];
  std::vector<float> d;
  for (std::int64_t o = 0; o < dw.dims[0]; ++o) {
    for (auto i : keep) {
      const auto at = dw.data.begin() + (o * c + i) * kk;
      d.insert(d.end(), at, at + kk);
    }
  }
  dw.data = std::move(d);
  dw.dims[1] = k;

  StyleNetwork out;
  out.encoder = network_from_checkpoint(enc, NetworkRole::Encoder, net.encoder.config());
  out.decoder = network_from_checkpoint(dec, NetworkRole::Decoder, net.decoder.config());
  out.loss_net = net.loss_net;
  return out;
}

}  // namespace ufse
