#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ufse/tensor.hpp"

namespace ufse {

/// A C×H×W activation block, viewed as C channel vectors of length H·W.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::int64_t channels, std::int64_t height, std::int64_t width);
  FeatureMap(std::int64_t channels, std::int64_t height, std::int64_t width, std::vector<float> values);

  // Accepts C×H×W or N×C×H×W (selecting batch item `item`).
  static FeatureMap from_tensor(const Tensor<float>& t, std::int64_t item = 0);
  // Returns 1×C×H×W.
  Tensor<float> to_tensor() const;

  std::int64_t channels() const { return channels_; }
  std::int64_t height() const { return height_; }
  std::int64_t width() const { return width_; }
  std::int64_t plane() const { return height_ * width_; }

  std::span<const float> channel(std::int64_t i) const;
  std::span<float> channel(std::int64_t i);
  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  bool operator==(const FeatureMap&) const = default;

 private:
  std::int64_t channels_ = 0, height_ = 0, width_ = 0;
  std::vector<float> values_;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::int64_t rows, std::int64_t cols, double fill = 0.0);
  static Matrix identity(std::int64_t n);

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }
  double& operator()(std::int64_t r, std::int64_t c) { return values_[static_cast<std::size_t>(r * cols_ + c)]; }
  double operator()(std::int64_t r, std::int64_t c) const { return values_[static_cast<std::size_t>(r * cols_ + c)]; }
  const double* row(std::int64_t r) const { return values_.data() + r * cols_; }
  double* row(std::int64_t r) { return values_.data() + r * cols_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  Matrix transposed() const;
  double frobenius_norm() const;

 private:
  std::int64_t rows_ = 0, cols_ = 0;
  std::vector<double> values_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);

/// Pairwise channel correlation coefficients. Constant channels correlate
/// to 0 with everything, themselves included.
struct CorrelationMatrix {
  Matrix coefficients;

  std::int64_t size() const { return coefficients.rows(); }
  double operator()(std::int64_t i, std::int64_t j) const { return coefficients(i, j); }
  double diagonal_sum() const;
  double mean_abs_off_diagonal() const;
};

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // population convention
  std::vector<double> magnitude;  // L2 norm of the raw channel
};

CorrelationMatrix channel_correlation(const FeatureMap& f);

// (F·Fᵀ)/(C·H·W) over the flattened channels.
Matrix gram(const FeatureMap& f);

// Ratio of non-constant channels over both features: (1/2C)(tr R_c + tr R_s).
double normalized_diagonal_sum(const FeatureMap& content, const FeatureMap& style);

ChannelStats channel_mean_std(const FeatureMap& f);
// Covariance of centered channels divided by H·W.
Matrix covariance(const FeatureMap& f);
std::vector<double> channel_magnitudes(const FeatureMap& f);

// Differentiable counterparts over tensors. `x` is C×L, C×H×W or 1×C×H×W.
template <typename T>
Tensor<T> channel_rows(const Tensor<T>& x);
template <typename T>
Tensor<T> channel_correlation(const Tensor<T>& x);
template <typename T>
Tensor<T> gram(const Tensor<T>& x);

// Export helpers: CSV uses 6 significant digits; the heatmap maps |r| to 0–255.
void write_matrix_csv(const std::string& path, const Matrix& m);
void write_correlation_heatmap(const std::string& path, const CorrelationMatrix& r, int scale = 1);

}  // namespace ufse
