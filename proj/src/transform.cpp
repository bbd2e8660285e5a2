#include "ufse/transform.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace ufse {

AlignmentKind parse_alignment_kind(const std::string& name) {
  if (name == "adain" || name == "AdaIN") return AlignmentKind::AdaIN;
  if (name == "wct" || name == "WCT") return AlignmentKind::WCT;
  throw UsageError("unknown alignment kind '" + name + "' (expected adain or wct)");
}

std::string to_string(AlignmentKind kind) { return kind == AlignmentKind::AdaIN ? "adain" : "wct"; }

namespace {

struct Moments {
  double mean = 0, stddev = 0;
};

template <typename U>
Moments moments(const U* v, std::int64_t n) {
  double s = 0;
  for (std::int64_t k = 0; k < n; ++k) s += static_cast<double>(v[k]);
  const double mean = s / static_cast<double>(n);
  double ss = 0;
  for (std::int64_t k = 0; k < n; ++k) {
    const double d = static_cast<double>(v[k]) - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss / static_cast<double>(n))};
}

}  // namespace

FeatureMap adain(const FeatureMap& content, const FeatureMap& style, double eps) {
  if (content.channels() != style.channels()) {
    throw UsageError("adain: channel counts differ (" + std::to_string(content.channels()) + " vs " +
                     std::to_string(style.channels()) + ")");
  }
  FeatureMap out(content.channels(), content.height(), content.width());
  for (std::int64_t c = 0; c < content.channels(); ++c) {
    auto xc = content.channel(c);
    auto xs = style.channel(c);
    const Moments mc = moments(xc.data(), content.plane());
    const Moments ms = moments(xs.data(), style.plane());
    const double scale = ms.stddev / (mc.stddev + eps);
    auto dst = out.channel(c);
    for (std::int64_t k = 0; k < content.plane(); ++k) {
      dst[k] = static_cast<float>(scale * (xc[k] - mc.mean) + ms.mean);
    }
  }
  return out;
}

template <typename T>
Tensor<T> adain(const Tensor<T>& content, const Tensor<T>& style, T eps) {
  if (content.rank() != 4 || style.rank() != 4) throw UsageError("adain expects N×C×H×W tensors");
  const std::int64_t n = content.dim(0), c = content.dim(1);
  if (style.dim(0) != n || style.dim(1) != c) {
    throw UsageError("adain: content " + shape_string(content.dims()) + " and style " +
                     shape_string(style.dims()) + " disagree on batch or channels");
  }
  const std::int64_t lc = content.dim(2) * content.dim(3), ls = style.dim(2) * style.dim(3);
  auto stats = std::make_shared<std::vector<Moments>>(static_cast<std::size_t>(2 * n * c));
  auto xd = content.data(), sd = style.data();
  std::vector<T> out(xd.size());
  for (std::int64_t p = 0; p < n * c; ++p) {
    const Moments mc = moments(xd.data() + p * lc, lc);
    const Moments ms = moments(sd.data() + p * ls, ls);
    (*stats)[2 * p] = mc;
    (*stats)[2 * p + 1] = ms;
    const double scale = ms.stddev / (mc.stddev + eps);
    for (std::int64_t k = 0; k < lc; ++k) {
      out[p * lc + k] = static_cast<T>(scale * (xd[p * lc + k] - mc.mean) + ms.mean);
    }
  }
  return make_result<T>(
      "adain", content.dims(), std::move(out), {content, style},
      [content, style, stats, n, c, lc, ls, eps](GradContext<T>& ctx) {
        auto xd = content.data(), sd = style.data();
        const auto& g = ctx.grad_output;
        for (std::int64_t p = 0; p < n * c; ++p) {
          const Moments mc = (*stats)[2 * p], ms = (*stats)[2 * p + 1];
          const double denom = mc.stddev + eps;
          const T* x = xd.data() + p * lc;
          const T* gp = g.data() + p * lc;
          double sum_g = 0, sum_g_xhat = 0;
          for (std::int64_t k = 0; k < lc; ++k) {
            sum_g += gp[k];
            sum_g_xhat += gp[k] * (x[k] - mc.mean) / denom;
          }
          if (ctx.wants(0)) {
            // h = σ_s·g; dx = (h − mean h)/(σ+eps) − (Σ h·(x−μ))·(x−μ)/(L·σ·(σ+eps)²)
            T* gx = ctx.grad_inputs[0].data() + p * lc;
            const double mean_h = ms.stddev * sum_g / static_cast<double>(lc);
            double h_dot = 0;
            for (std::int64_t k = 0; k < lc; ++k) h_dot += ms.stddev * gp[k] * (x[k] - mc.mean);
            const double coef =
                mc.stddev > 0 ? h_dot / (static_cast<double>(lc) * mc.stddev * denom * denom) : 0.0;
            for (std::int64_t k = 0; k < lc; ++k) {
              gx[k] += static_cast<T>((ms.stddev * gp[k] - mean_h) / denom - coef * (x[k] - mc.mean));
            }
          }
          if (ctx.wants(1)) {
            T* gs = ctx.grad_inputs[1].data() + p * ls;
            const T* s = sd.data() + p * ls;
            const double d_mean = sum_g / static_cast<double>(ls);
            const double d_std = ms.stddev > 0 ? sum_g_xhat / (static_cast<double>(ls) * ms.stddev) : 0.0;
            for (std::int64_t k = 0; k < ls; ++k) gs[k] += static_cast<T>(d_mean + d_std * (s[k] - ms.mean));
          }
        }
      });
}

template Tensor<float> adain(const Tensor<float>&, const Tensor<float>&, float);
template Tensor<double> adain(const Tensor<double>&, const Tensor<double>&, double);

FeatureMap blend(const FeatureMap& content, const FeatureMap& transformed, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("blend: alpha must lie in [0, 1]");
  if (content.channels() != transformed.channels() || content.height() != transformed.height() ||
      content.width() != transformed.width()) {
    throw UsageError("blend: feature shapes differ");
  }
  if (alpha == 0.0) return content;
  if (alpha == 1.0) return transformed;
  FeatureMap out(content.channels(), content.height(), content.width());
  auto a = content.values(), b = transformed.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>((1.0 - alpha) * a[i] + alpha * b[i]);
  return out;
}

namespace {

void rotate_rows(double* __restrict rp, double* __restrict rq, std::int64_t n, double cs, double sn) {
  for (std::int64_t k = 0; k < n; ++k) {
    const double xp = rp[k], xq = rq[k];
    rp[k] = cs * xp - sn * xq;
    rq[k] = sn * xp + cs * xq;
  }
}

}  // namespace

SymmetricEigen sym_eig(const Matrix& input) {
  const std::int64_t n = input.rows();
  if (input.cols() != n) throw UsageError("sym_eig needs a square matrix");
  double max_abs = 0;
  for (double v : input.values()) max_abs = std::max(max_abs, std::abs(v));
  const double sym_tol = 1e-5 * std::max(1.0, max_abs);
  // Rows of `vt` are the eigenvectors; A is kept symmetric explicitly.
  Matrix a(n, n);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      if (std::abs(input(i, j) - input(j, i)) > sym_tol) throw UsageError("sym_eig: matrix is not symmetric");
      a(i, j) = 0.5 * (input(i, j) + input(j, i));
    }
  }
  Matrix vt = Matrix::identity(n);
  const double norm = a.frobenius_norm();

  auto off_norm = [&] {
    double s = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        if (i != j) s += a(i, j) * a(i, j);
      }
    }
    return std::sqrt(s);
  };

  constexpr int kMaxSweeps = 100;
  constexpr double kThreshold = 1e-10;
  const double skip = kThreshold * norm / static_cast<double>(n);
  struct Rotation {
    std::int64_t p, q;
    double cs, sn, app, aqq;
  };
  std::vector<Rotation> pairs;
  const std::int64_t m = n + (n % 2);
  std::vector<std::int64_t> slots(static_cast<std::size_t>(m));
  std::iota(slots.begin(), slots.end(), 0);
  int sweeps = 0;
  while (norm > 0 && off_norm() >= kThreshold * norm) {
    if (sweeps == kMaxSweeps) {
      throw NumericalError("sym_eig: Jacobi iteration did not converge in " + std::to_string(kMaxSweeps) + " sweeps");
    }
    ++sweeps;
    // Round-robin ordering: each round applies m/2 disjoint rotations at once,
    // so both the row and the column updates walk contiguous memory.
    for (std::int64_t round = 0; round + 1 < m; ++round) {
      pairs.clear();
      for (std::int64_t i = 0; i < m / 2; ++i) {
        const std::int64_t p = std::min(slots[i], slots[m - 1 - i]), q = std::max(slots[i], slots[m - 1 - i]);
        if (q >= n) continue;  // paired with the padding slot
        const double apq = a(p, q);
        // An entry this small cannot keep the off-diagonal norm above the threshold.
        if (std::abs(apq) <= skip) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        pairs.push_back({p, q, cs, t * cs, app - t * apq, aqq + t * apq});
      }
      std::rotate(slots.begin() + 1, slots.end() - 1, slots.end());
      for (const auto& r : pairs) rotate_rows(a.row(r.p), a.row(r.q), n, r.cs, r.sn);
      for (std::int64_t k = 0; k < n; ++k) {
        double* row = a.row(k);
        for (const auto& r : pairs) {
          const double xp = row[r.p], xq = row[r.q];
          row[r.p] = r.cs * xp - r.sn * xq;
          row[r.q] = r.sn * xp + r.cs * xq;
        }
      }
      for (const auto& r : pairs) {
        // The 2×2 block follows in closed form.
        a(r.p, r.p) = r.app;
        a(r.q, r.q) = r.aqq;
        a(r.p, r.q) = 0.0;
        a(r.q, r.p) = 0.0;
        rotate_rows(vt.row(r.p), vt.row(r.q), n, r.cs, r.sn);
      }
    }
  }

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t x, std::int64_t y) { return a(x, x) > a(y, y); });
  SymmetricEigen out;
  out.sweeps = sweeps;
  out.values.resize(static_cast<std::size_t>(n));
  out.vectors = Matrix(n, n);
  for (std::int64_t k = 0; k < n; ++k) {
    const std::int64_t src = order[k];
    out.values[k] = a(src, src);
    for (std::int64_t i = 0; i < n; ++i) out.vectors(i, k) = vt(src, i);
  }
  return out;
}

namespace {

struct Centered {
  std::vector<double> mean;
  Matrix values;  // C × L
};

Centered center(const FeatureMap& f) {
  Centered out;
  const std::int64_t c = f.channels(), l = f.plane();
  out.mean.resize(static_cast<std::size_t>(c));
  out.values = Matrix(c, l);
  for (std::int64_t i = 0; i < c; ++i) {
    auto fi = f.channel(i);
    double s = 0;
    for (float v : fi) s += v;
    out.mean[i] = s / static_cast<double>(l);
    for (std::int64_t k = 0; k < l; ++k) out.values(i, k) = fi[k] - out.mean[i];
  }
  return out;
}

using RowMatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatD> view(const Matrix& m) { return {m.values().data(), m.rows(), m.cols()}; }

Matrix covariance_of(const Matrix& centered) {
  const std::int64_t c = centered.rows();
  Matrix cov(c, c);
  Eigen::Map<RowMatD> out(cov.values().data(), c, c);
  out.noalias() = view(centered) * view(centered).transpose();
  out /= static_cast<double>(centered.cols());
  // Mirror the upper triangle so the result is exactly symmetric.
  for (std::int64_t i = 0; i < c; ++i)
    for (std::int64_t j = i + 1; j < c; ++j) cov(j, i) = cov(i, j);
  return cov;
}

// E·diag(f(λ))·Eᵀ
template <typename F>
Matrix spectral_map(const SymmetricEigen& eig, F f) {
  const std::int64_t n = eig.vectors.rows();
  Matrix scaled(n, n);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t k = 0; k < n; ++k) scaled(i, k) = eig.vectors(i, k) * f(eig.values[k]);
  }
  return scaled * eig.vectors.transposed();
}

Matrix whitening_matrix(const Matrix& cov, double eig_floor) {
  return spectral_map(sym_eig(cov), [eig_floor](double v) { return v > eig_floor ? 1.0 / std::sqrt(v) : 0.0; });
}

FeatureMap apply(const Matrix& m, const Matrix& centered, const std::vector<double>& offset, std::int64_t h,
                 std::int64_t w) {
  const std::int64_t c = m.rows(), l = centered.cols();
  const RowMatD y = view(m) * view(centered);
  FeatureMap out(c, h, w);
  for (std::int64_t i = 0; i < c; ++i) {
    const double shift = offset.empty() ? 0.0 : offset[i];
    auto dst = out.channel(i);
    for (std::int64_t k = 0; k < l; ++k) dst[k] = static_cast<float>(y(i, k) + shift);
  }
  return out;
}

}  // namespace

FeatureMap whiten(const FeatureMap& content, double eig_floor) {
  if (content.plane() < 2) throw UsageError("whiten needs H·W >= 2");
  const Centered cc = center(content);
  return apply(whitening_matrix(covariance_of(cc.values), eig_floor), cc.values, {}, content.height(),
               content.width());
}

FeatureMap whiten_color(const FeatureMap& content, const FeatureMap& style, double eig_floor) {
  if (content.channels() != style.channels()) {
    throw UsageError("whiten_color: channel counts differ (" + std::to_string(content.channels()) + " vs " +
                     std::to_string(style.channels()) + ")");
  }
  if (content.plane() < 2 || style.plane() < 2) throw UsageError("whiten_color needs H·W >= 2 on both features");
  const Centered cc = center(content);
  const Centered sc = center(style);
  const Matrix whitening = whitening_matrix(covariance_of(cc.values), eig_floor);
  const Matrix coloring =
      spectral_map(sym_eig(covariance_of(sc.values)), [](double v) { return v > 0 ? std::sqrt(v) : 0.0; });
  return apply(coloring * whitening, cc.values, sc.mean, content.height(), content.width());
}

FeatureMap align(AlignmentKind kind, const FeatureMap& content, const FeatureMap& style) {
  return kind == AlignmentKind::AdaIN ? adain(content, style) : whiten_color(content, style);
}

}  // namespace ufse
