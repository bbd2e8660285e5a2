#include "ufse/featstats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "ufse/csv.hpp"
#include "ufse/image.hpp"
#include "ufse/ops.hpp"

namespace ufse {

FeatureMap::FeatureMap(std::int64_t channels, std::int64_t height, std::int64_t width)
    : FeatureMap(channels, height, width,
                 std::vector<float>(static_cast<std::size_t>(std::max<std::int64_t>(channels * height * width, 0)))) {}

FeatureMap::FeatureMap(std::int64_t channels, std::int64_t height, std::int64_t width, std::vector<float> values)
    : channels_(channels), height_(height), width_(width), values_(std::move(values)) {
  if (channels < 1 || height < 1 || width < 1) {
    throw UsageError("feature map dimensions must be >= 1");
  }
  if (static_cast<std::int64_t>(values_.size()) != channels * height * width) {
    throw UsageError("feature map value count does not match C×H×W");
  }
}

FeatureMap FeatureMap::from_tensor(const Tensor<float>& t, std::int64_t item) {
  const auto& d = t.dims();
  std::int64_t c, h, w, offset = 0;
  if (d.size() == 3) {
    c = d[0], h = d[1], w = d[2];
  } else if (d.size() == 4) {
    if (item < 0 || item >= d[0]) throw UsageError("batch item out of range");
    c = d[1], h = d[2], w = d[3];
    offset = item * c * h * w;
  } else {
    throw UsageError("feature map needs a C×H×W or N×C×H×W tensor, got " + shape_string(d));
  }
  auto data = t.data().subspan(static_cast<std::size_t>(offset), static_cast<std::size_t>(c * h * w));
  return FeatureMap(c, h, w, std::vector<float>(data.begin(), data.end()));
}

Tensor<float> FeatureMap::to_tensor() const {
  return Tensor<float>(Shape{1, channels_, height_, width_}, values_);
}

std::span<const float> FeatureMap::channel(std::int64_t i) const {
  return std::span<const float>(values_).subspan(static_cast<std::size_t>(i * plane()),
                                                 static_cast<std::size_t>(plane()));
}

std::span<float> FeatureMap::channel(std::int64_t i) {
  return std::span<float>(values_).subspan(static_cast<std::size_t>(i * plane()), static_cast<std::size_t>(plane()));
}

Matrix::Matrix(std::int64_t rows, std::int64_t cols, double fill)
    : rows_(rows), cols_(cols), values_(static_cast<std::size_t>(rows * cols), fill) {}

Matrix Matrix::identity(std::int64_t n) {
  Matrix m(n, n);
  for (std::int64_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::int64_t r = 0; r < rows_; ++r) {
    for (std::int64_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

double Matrix::frobenius_norm() const {
  double s = 0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw UsageError("matrix product dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::int64_t i = 0; i < a.rows(); ++i) {
    for (std::int64_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::int64_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw UsageError("matrix difference dimension mismatch");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.values().size(); ++i) out.values()[i] = a.values()[i] - b.values()[i];
  return out;
}

double CorrelationMatrix::diagonal_sum() const {
  double s = 0;
  for (std::int64_t i = 0; i < size(); ++i) s += coefficients(i, i);
  return s;
}

double CorrelationMatrix::mean_abs_off_diagonal() const {
  const std::int64_t c = size();
  if (c < 2) return 0.0;
  double s = 0;
  for (std::int64_t i = 0; i < c; ++i) {
    for (std::int64_t j = 0; j < c; ++j) {
      if (i != j) s += std::abs(coefficients(i, j));
    }
  }
  return s / static_cast<double>(c * (c - 1));
}

namespace {

// Centered channels (double), their norms, and unit vectors (0 for constant).
struct CenteredChannels {
  std::int64_t channels = 0, length = 0;
  std::vector<double> unit;
  std::vector<double> norm;
};

template <typename Span>
CenteredChannels center_and_normalize(Span values, std::int64_t channels, std::int64_t length) {
  CenteredChannels out;
  out.channels = channels;
  out.length = length;
  out.unit.resize(static_cast<std::size_t>(channels * length));
  out.norm.resize(static_cast<std::size_t>(channels));
  for (std::int64_t c = 0; c < channels; ++c) {
    const auto* src = values.data() + c * length;
    double* dst = out.unit.data() + c * length;
    double sum = 0;
    for (std::int64_t k = 0; k < length; ++k) sum += static_cast<double>(src[k]);
    const double mean = sum / static_cast<double>(length);
    double ss = 0;
    for (std::int64_t k = 0; k < length; ++k) {
      dst[k] = static_cast<double>(src[k]) - mean;
      ss += dst[k] * dst[k];
    }
    const double n = std::sqrt(ss);
    out.norm[c] = n;
    const double inv = n > 0.0 ? 1.0 / n : 0.0;
    for (std::int64_t k = 0; k < length; ++k) dst[k] *= inv;
  }
  return out;
}

Matrix unit_products(const CenteredChannels& cc) {
  const std::int64_t c = cc.channels, l = cc.length;
  Matrix r(c, c);
  for (std::int64_t i = 0; i < c; ++i) {
    const double* ui = cc.unit.data() + i * l;
    for (std::int64_t j = i; j < c; ++j) {
      const double* uj = cc.unit.data() + j * l;
      double s = 0;
      for (std::int64_t k = 0; k < l; ++k) s += ui[k] * uj[k];
      r(i, j) = s;
      r(j, i) = s;
    }
  }
  return r;
}

}  // namespace

CorrelationMatrix channel_correlation(const FeatureMap& f) {
  if (f.plane() < 2) throw UsageError("channel_correlation needs H·W >= 2");
  const auto cc = center_and_normalize(f.values(), f.channels(), f.plane());
  return CorrelationMatrix{unit_products(cc)};
}

Matrix gram(const FeatureMap& f) {
  const std::int64_t c = f.channels(), l = f.plane();
  const double scale = 1.0 / static_cast<double>(c * l);
  Matrix g(c, c);
  for (std::int64_t i = 0; i < c; ++i) {
    auto fi = f.channel(i);
    for (std::int64_t j = i; j < c; ++j) {
      auto fj = f.channel(j);
      double s = 0;
      for (std::int64_t k = 0; k < l; ++k) s += static_cast<double>(fi[k]) * fj[k];
      g(i, j) = s * scale;
      g(j, i) = s * scale;
    }
  }
  return g;
}

double normalized_diagonal_sum(const FeatureMap& content, const FeatureMap& style) {
  if (content.channels() != style.channels()) {
    throw UsageError("normalized_diagonal_sum: channel counts differ (" + std::to_string(content.channels()) +
                     " vs " + std::to_string(style.channels()) + ")");
  }
  const double total = channel_correlation(content).diagonal_sum() + channel_correlation(style).diagonal_sum();
  return total / (2.0 * static_cast<double>(content.channels()));
}

ChannelStats channel_mean_std(const FeatureMap& f) {
  ChannelStats st;
  const std::int64_t c = f.channels();
  const double l = static_cast<double>(f.plane());
  st.mean.resize(c);
  st.stddev.resize(c);
  st.magnitude.resize(c);
  for (std::int64_t i = 0; i < c; ++i) {
    auto fi = f.channel(i);
    double sum = 0, sq = 0;
    for (float v : fi) {
      sum += v;
      sq += static_cast<double>(v) * v;
    }
    const double mean = sum / l;
    double ss = 0;
    for (float v : fi) ss += (v - mean) * (v - mean);
    st.mean[i] = mean;
    st.stddev[i] = std::sqrt(ss / l);
    st.magnitude[i] = std::sqrt(sq);
  }
  return st;
}

Matrix covariance(const FeatureMap& f) {
  const std::int64_t c = f.channels(), l = f.plane();
  std::vector<double> centered(static_cast<std::size_t>(c * l));
  for (std::int64_t i = 0; i < c; ++i) {
    auto fi = f.channel(i);
    double sum = 0;
    for (float v : fi) sum += v;
    const double mean = sum / static_cast<double>(l);
    for (std::int64_t k = 0; k < l; ++k) centered[i * l + k] = fi[k] - mean;
  }
  Matrix cov(c, c);
  for (std::int64_t i = 0; i < c; ++i) {
    const double* ci = centered.data() + i * l;
    for (std::int64_t j = i; j < c; ++j) {
      const double* cj = centered.data() + j * l;
      double s = 0;
      for (std::int64_t k = 0; k < l; ++k) s += ci[k] * cj[k];
      cov(i, j) = s / static_cast<double>(l);
      cov(j, i) = cov(i, j);
    }
  }
  return cov;
}

std::vector<double> channel_magnitudes(const FeatureMap& f) {
  std::vector<double> m(static_cast<std::size_t>(f.channels()));
  for (std::int64_t i = 0; i < f.channels(); ++i) {
    double sq = 0;
    for (float v : f.channel(i)) sq += static_cast<double>(v) * v;
    m[i] = std::sqrt(sq);
  }
  return m;
}

template <typename T>
Tensor<T> channel_rows(const Tensor<T>& x) {
  const auto& d = x.dims();
  if (d.size() == 2) return x;
  if (d.size() == 3) return reshape(x, Shape{d[0], d[1] * d[2]});
  if (d.size() == 4 && d[0] == 1) return reshape(x, Shape{d[1], d[2] * d[3]});
  throw UsageError("expected a single feature map (C×L, C×H×W or 1×C×H×W), got " + shape_string(d));
}

template <typename T>
Tensor<T> channel_correlation(const Tensor<T>& x) {
  const Tensor<T> rows = channel_rows(x);
  const std::int64_t c = rows.dim(0), l = rows.dim(1);
  if (l < 2) throw UsageError("channel_correlation needs H·W >= 2");
  auto cc = std::make_shared<CenteredChannels>(center_and_normalize(rows.data(), c, l));
  const Matrix r = unit_products(*cc);
  std::vector<T> out(static_cast<std::size_t>(c * c));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(r.values()[i]);

  return make_result<T>("channel_correlation", Shape{c, c}, std::move(out), {rows}, [cc, c, l](GradContext<T>& ctx) {
    const auto& g = ctx.grad_output;
    auto gx = ctx.grad_inputs[0];
    std::vector<double> du(static_cast<std::size_t>(l));
    for (std::int64_t i = 0; i < c; ++i) {
      const double n = cc->norm[i];
      if (n == 0.0) continue;
      // dL/du_i = Σ_j (G_ij + G_ji) u_j
      std::fill(du.begin(), du.end(), 0.0);
      for (std::int64_t j = 0; j < c; ++j) {
        const double w = static_cast<double>(g[i * c + j]) + static_cast<double>(g[j * c + i]);
        if (w == 0.0) continue;
        const double* uj = cc->unit.data() + j * l;
        for (std::int64_t k = 0; k < l; ++k) du[k] += w * uj[k];
      }
      const double* ui = cc->unit.data() + i * l;
      double radial = 0;
      for (std::int64_t k = 0; k < l; ++k) radial += du[k] * ui[k];
      double mean = 0;
      for (std::int64_t k = 0; k < l; ++k) {
        du[k] = (du[k] - radial * ui[k]) / n;
        mean += du[k];
      }
      mean /= static_cast<double>(l);
      for (std::int64_t k = 0; k < l; ++k) gx[i * l + k] += static_cast<T>(du[k] - mean);
    }
  });
}

template <typename T>
Tensor<T> gram(const Tensor<T>& x) {
  const Tensor<T> rows = channel_rows(x);
  const T scale = T(1) / static_cast<T>(rows.numel());
  return mul_scalar(matmul(rows, transpose(rows)), scale);
}

template Tensor<float> channel_rows(const Tensor<float>&);
template Tensor<double> channel_rows(const Tensor<double>&);
template Tensor<float> channel_correlation(const Tensor<float>&);
template Tensor<double> channel_correlation(const Tensor<double>&);
template Tensor<float> gram(const Tensor<float>&);
template Tensor<double> gram(const Tensor<double>&);

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (std::int64_t r = 0; r < m.rows(); ++r) {
    for (std::int64_t c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << csv::format(m(r, c));
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

void write_correlation_heatmap(const std::string& path, const CorrelationMatrix& r, int scale) {
  if (scale < 1) throw UsageError("heatmap scale must be >= 1");
  const std::int64_t n = r.size(), side = n * scale;
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(side * side));
  for (std::int64_t y = 0; y < side; ++y) {
    for (std::int64_t x = 0; x < side; ++x) {
      const double v = std::clamp(std::abs(r(y / scale, x / scale)), 0.0, 1.0);
      pixels[y * side + x] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  write_png_gray(path, static_cast<int>(side), static_cast<int>(side), pixels);
}

}  // namespace ufse
