#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "ufse/feature_set.hpp"
#include "ufse/tensor.hpp"

namespace ufse {

struct LossWeights {
  double content = 1.0;
  double style = 50.0;
  double uncorrelation = 0.01;
};

// Signed sums correlation coefficients as they are; Absolute sums their
// magnitudes (smoothed as sqrt(r² + 1e-12)) so the optimum is zero correlation.
enum class UncorrelationMode { Signed, Absolute };

UncorrelationMode parse_uncorrelation_mode(const std::string& name);
std::string to_string(UncorrelationMode mode);

struct LossReport {
  std::int64_t iteration = 0;
  double content = 0;
  double style = 0;
  double uncorrelation = 0;
  double total = 0;
};

template <typename T>
Tensor<T> content_loss(const Tensor<T>& out, const Tensor<T>& target);

// Sum over the tags of `style` of the mean squared Gram difference.
template <typename T>
Tensor<T> style_loss(const BasicFeatureSet<T>& out, const BasicFeatureSet<T>& style);

// Same, restricted to `tags` (in order).
template <typename T>
Tensor<T> style_loss(const BasicFeatureSet<T>& out, const BasicFeatureSet<T>& style,
                     const std::vector<std::string>& tags);

// ½(Σ_{i≠j} g(r(fc_i, fc_j)) + Σ_{i≠j} g(r(fs_i, fs_j))) over ordered pairs.
template <typename T>
Tensor<T> uncorrelation_loss(const Tensor<T>& content_features, const Tensor<T>& style_features,
                             UncorrelationMode mode = UncorrelationMode::Absolute);

template <typename T>
Tensor<T> total_loss(const Tensor<T>& content, const Tensor<T>& style, const Tensor<T>& uncorrelation,
                     const LossWeights& w);

double total_loss(double content, double style, double uncorrelation, const LossWeights& w);

// Trailing moving average with the given window (shorter at the start).
std::vector<double> smoothed(const std::vector<double>& values, std::size_t window);

/// Streams LossReport rows as CSV: iteration,content,style,uncorrelation,total.
class LossHistoryWriter {
 public:
  explicit LossHistoryWriter(std::ostream& out);
  void write(const LossReport& r);

 private:
  std::ostream& out_;
};

std::vector<LossReport> read_loss_history(const std::string& path);
void write_loss_history(const std::string& path, const std::vector<LossReport>& history);

}  // namespace ufse
