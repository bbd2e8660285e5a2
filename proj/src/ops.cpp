#include <numeric>
#include "ufse/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace ufse {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.dims() != b.dims()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_string(a.dims()) + " vs " +
                      shape_string(b.dims()));
  }
}

template <typename T>
void require_rank(const char* op, const Tensor<T>& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw ConfigError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                      shape_string(x.dims()));
  }
}

struct ConvGeometry {
  std::int64_t channels, height, width, kernel, stride, pad, out_h, out_w;
};

// Output columns [lo, hi) whose input column ox·stride − pad + kj falls
// inside the image.
inline void valid_range(const ConvGeometry& g, std::int64_t kj, std::int64_t& lo, std::int64_t& hi) {
  const std::int64_t off = kj - g.pad;
  lo = std::min<std::int64_t>(g.out_w, off >= 0 ? 0 : (-off + g.stride - 1) / g.stride);
  hi = g.width - off <= 0 ? 0 : std::min<std::int64_t>(g.out_w, (g.width - off + g.stride - 1) / g.stride);
  if (hi < lo) hi = lo;
}

// col is (C·k·k) × (out_h·out_w), row-major.
template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  const std::int64_t plane = g.out_h * g.out_w;
  for (std::int64_t c = 0; c < g.channels; ++c) {
    const T* src = img + c * g.height * g.width;
    for (std::int64_t ki = 0; ki < g.kernel; ++ki) {
      for (std::int64_t kj = 0; kj < g.kernel; ++kj) {
        T* dst = col + ((c * g.kernel + ki) * g.kernel + kj) * plane;
        std::int64_t lo, hi;
        valid_range(g, kj, lo, hi);
        const std::int64_t off = kj - g.pad;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ki;
          T* row = dst + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(row, row + g.out_w, T(0));
            continue;
          }
          const T* srow = src + iy * g.width + off;
          std::fill(row, row + lo, T(0));
          if (g.stride == 1) {
            std::copy(srow + lo, srow + hi, row + lo);
          } else {
            for (std::int64_t ox = lo; ox < hi; ++ox) row[ox] = srow[ox * g.stride];
          }
          std::fill(row + hi, row + g.out_w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* img) {
  const std::int64_t plane = g.out_h * g.out_w;
  for (std::int64_t c = 0; c < g.channels; ++c) {
    T* dst = img + c * g.height * g.width;
    for (std::int64_t ki = 0; ki < g.kernel; ++ki) {
      for (std::int64_t kj = 0; kj < g.kernel; ++kj) {
        const T* src = col + ((c * g.kernel + ki) * g.kernel + kj) * plane;
        std::int64_t lo, hi;
        valid_range(g, kj, lo, hi);
        const std::int64_t off = kj - g.pad;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.height) continue;
          const T* row = src + oy * g.out_w;
          T* drow = dst + iy * g.width + off;
          for (std::int64_t ox = lo; ox < hi; ++ox) drow[ox * g.stride] += row[ox];
        }
      }
    }
  }
}

template <typename T, typename F, typename G>
Tensor<T> unary(const char* op, const Tensor<T>& x, F forward, G derivative) {
  auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(xd[i]);
  return make_result<T>(op, x.dims(), std::move(out), {x}, [x, derivative](GradContext<T>& ctx) {
    auto xd = x.data();
    auto gx = ctx.grad_inputs[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += ctx.grad_output[i] * derivative(xd[i], ctx.output[i]);
  });
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride, int pad) {
  require_rank("conv2d", input, 4);
  require_rank("conv2d", weight, 4);
  require_rank("conv2d", bias, 1);
  const std::int64_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::int64_t cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin || weight.dim(3) != k) {
    throw ConfigError("conv2d: weight " + shape_string(weight.dims()) + " incompatible with input " +
                      shape_string(input.dims()));
  }
  if (k % 2 == 0) throw ConfigError("conv2d: kernel size must be odd, got " + std::to_string(k));
  if (bias.dim(0) != cout) throw ConfigError("conv2d: bias length must equal output channels");
  if (stride < 1 || pad < 0) throw ConfigError("conv2d: stride must be >= 1 and pad >= 0");
  const std::int64_t span_h = h + 2 * pad - k, span_w = w + 2 * pad - k;
  if (span_h < 0 || span_w < 0 || span_h % stride != 0 || span_w % stride != 0) {
    throw ConfigError("conv2d: output size is not integral for input " + shape_string(input.dims()) +
                      " kernel " + std::to_string(k) + " stride " + std::to_string(stride) + " pad " +
                      std::to_string(pad));
  }
  const ConvGeometry g{cin, h, w, k, stride, pad, span_h / stride + 1, span_w / stride + 1};
  const std::int64_t plane = g.out_h * g.out_w, patch = cin * k * k;
  const bool identity_cols = (k == 1 && pad == 0 && stride == 1);

  std::vector<T> out(static_cast<std::size_t>(n * cout * plane));
  // Columns of every batch item, reused by the weight gradient.
  const bool keep_cols = !identity_cols && grad_enabled() && weight.requires_grad();
  auto cols_all = std::make_shared<std::vector<T>>(
      identity_cols ? 0 : static_cast<std::size_t>((keep_cols ? n : 1) * patch * plane));
  CMapMat<T> wmat(weight.data().data(), cout, patch);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(bias.data().data(), cout);
  for (std::int64_t b = 0; b < n; ++b) {
    const T* img = input.data().data() + b * cin * h * w;
    const T* cols = img;
    if (!identity_cols) {
      T* dst = cols_all->data() + (keep_cols ? b * patch * plane : 0);
      im2col(img, g, dst);
      cols = dst;
    }
    MapMat<T> omat(out.data() + b * cout * plane, cout, plane);
    omat.noalias() = wmat * CMapMat<T>(cols, patch, plane);
    omat.colwise() += bvec;
  }

  return make_result<T>(
      "conv2d", Shape{n, cout, g.out_h, g.out_w}, std::move(out), {input, weight, bias},
      [input, weight, g, n, cout, plane, patch, identity_cols, keep_cols,
       cols_all = keep_cols ? cols_all : nullptr](GradContext<T>& ctx) {
        const bool want_x = ctx.wants(0), want_w = ctx.wants(1), want_b = ctx.wants(2);
        std::vector<T> col(identity_cols || keep_cols ? 0 : static_cast<std::size_t>(patch * plane));
        std::vector<T> dcol(want_x && !identity_cols ? static_cast<std::size_t>(patch * plane) : 0);
        CMapMat<T> wmat(weight.data().data(), cout, patch);
        const std::int64_t img_size = g.channels * g.height * g.width;
        for (std::int64_t b = 0; b < n; ++b) {
          CMapMat<T> gout(ctx.grad_output.data() + b * cout * plane, cout, plane);
          if (want_b) {
            auto gb = ctx.grad_inputs[2];
            // Plain loop: Eigen's vectorised sum depends on the row's alignment.
            for (std::int64_t c = 0; c < cout; ++c) {
              const T* row = ctx.grad_output.data() + (b * cout + c) * plane;
              gb[c] += std::accumulate(row, row + plane, T(0));
            }
          }
          if (want_w) {
            const T* img = input.data().data() + b * img_size;
            const T* cols = img;
            if (keep_cols) {
              cols = cols_all->data() + b * patch * plane;
            } else if (!identity_cols) {
              im2col(img, g, col.data());
              cols = col.data();
            }
            MapMat<T> gw(ctx.grad_inputs[1].data(), cout, patch);
            gw.noalias() += gout * CMapMat<T>(cols, patch, plane).transpose();
          }
          if (want_x) {
            T* gx = ctx.grad_inputs[0].data() + b * img_size;
            if (identity_cols) {
              MapMat<T>(gx, patch, plane).noalias() += wmat.transpose() * gout;
            } else {
              MapMat<T>(dcol.data(), patch, plane).noalias() = wmat.transpose() * gout;
              col2im_add(dcol.data(), g, gx);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary<T>(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary<T>("square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  for (auto v : x.data()) {
    if (v < T(0)) throw NumericalError("sqrt: negative input");
  }
  return unary<T>(
      "sqrt", x, [](T v) { return std::sqrt(v); }, [](T, T y) { return T(0.5) / y; });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T s) {
  return unary<T>("mul_scalar", x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T s) {
  return unary<T>("add_scalar", x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  auto ad = a.data(), bd = b.data();
  std::vector<T> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  return make_result<T>("add", a.dims(), std::move(out), {a, b}, [](GradContext<T>& ctx) {
    for (std::size_t k = 0; k < 2; ++k) {
      auto g = ctx.grad_inputs[k];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.grad_output[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  auto ad = a.data(), bd = b.data();
  std::vector<T> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  return make_result<T>("sub", a.dims(), std::move(out), {a, b}, [](GradContext<T>& ctx) {
    auto ga = ctx.grad_inputs[0], gb = ctx.grad_inputs[1];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += ctx.grad_output[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= ctx.grad_output[i];
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  auto ad = a.data(), bd = b.data();
  std::vector<T> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  return make_result<T>("mul", a.dims(), std::move(out), {a, b}, [a, b](GradContext<T>& ctx) {
    auto ad = a.data(), bd = b.data();
    auto ga = ctx.grad_inputs[0], gb = ctx.grad_inputs[1];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += ctx.grad_output[i] * bd[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += ctx.grad_output[i] * ad[i];
  });
}

template <typename T>
Tensor<T> upsample_nearest_2x(const Tensor<T>& x) {
  require_rank("upsample_nearest_2x", x, 4);
  const std::int64_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  auto xd = x.data();
  std::vector<T> out(static_cast<std::size_t>(planes * 4 * h * w));
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = xd.data() + p * h * w;
    T* dst = out.data() + p * 4 * h * w;
    for (std::int64_t y = 0; y < 2 * h; ++y) {
      for (std::int64_t xx = 0; xx < 2 * w; ++xx) dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
    }
  }
  return make_result<T>("upsample_nearest_2x", Shape{x.dim(0), x.dim(1), 2 * h, 2 * w}, std::move(out), {x},
                        [planes, h, w](GradContext<T>& ctx) {
                          auto gx = ctx.grad_inputs[0];
                          for (std::int64_t p = 0; p < planes; ++p) {
                            const T* g = ctx.grad_output.data() + p * 4 * h * w;
                            T* dst = gx.data() + p * h * w;
                            for (std::int64_t y = 0; y < 2 * h; ++y) {
                              for (std::int64_t xx = 0; xx < 2 * w; ++xx) dst[(y / 2) * w + xx / 2] += g[y * 2 * w + xx];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> maxpool_2x(const Tensor<T>& x) {
  require_rank("maxpool_2x", x, 4);
  const std::int64_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ConfigError("maxpool_2x: spatial size must be even, got " + shape_string(x.dims()));
  }
  const std::int64_t oh = h / 2, ow = w / 2;
  auto xd = x.data();
  std::vector<T> out(static_cast<std::size_t>(planes * oh * ow));
  auto argmax = std::make_shared<std::vector<std::int64_t>>(out.size());
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = xd.data() + p * h * w;
    for (std::int64_t y = 0; y < oh; ++y) {
      for (std::int64_t xx = 0; xx < ow; ++xx) {
        std::int64_t best = (2 * y) * w + 2 * xx;
        const std::int64_t cand[3] = {best + 1, best + w, best + w + 1};
        for (auto c : cand) {
          if (src[c] > src[best]) best = c;
        }
        const std::size_t o = static_cast<std::size_t>((p * oh + y) * ow + xx);
        out[o] = src[best];
        (*argmax)[o] = p * h * w + best;
      }
    }
  }
  return make_result<T>("maxpool_2x", Shape{x.dim(0), x.dim(1), oh, ow}, std::move(out), {x},
                        [argmax](GradContext<T>& ctx) {
                          auto gx = ctx.grad_inputs[0];
                          for (std::size_t i = 0; i < argmax->size(); ++i) gx[(*argmax)[i]] += ctx.grad_output[i];
                        });
}

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x) {
  double s = 0;
  for (auto v : x.data()) s += v;
  return make_result<T>("reduce_sum", Shape{1}, {static_cast<T>(s)}, {x}, [](GradContext<T>& ctx) {
    const T g = ctx.grad_output[0];
    for (auto& v : ctx.grad_inputs[0]) v += g;
  });
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x) {
  const double n = static_cast<double>(x.numel());
  double s = 0;
  for (auto v : x.data()) s += v;
  return make_result<T>("reduce_mean", Shape{1}, {static_cast<T>(s / n)}, {x}, [n](GradContext<T>& ctx) {
    const T g = static_cast<T>(ctx.grad_output[0] / n);
    for (auto& v : ctx.grad_inputs[0]) v += g;
  });
}

template <typename T>
Tensor<T> reduce_var(const Tensor<T>& x) {
  const double n = static_cast<double>(x.numel());
  double s = 0;
  for (auto v : x.data()) s += v;
  const double mean = s / n;
  double ss = 0;
  for (auto v : x.data()) ss += (v - mean) * (v - mean);
  return make_result<T>("reduce_var", Shape{1}, {static_cast<T>(ss / n)}, {x}, [x, mean, n](GradContext<T>& ctx) {
    const double g = ctx.grad_output[0];
    auto xd = x.data();
    auto gx = ctx.grad_inputs[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += static_cast<T>(g * 2.0 * (xd[i] - mean) / n);
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ConfigError("matmul: inner dimensions differ " + shape_string(a.dims()) + " · " + shape_string(b.dims()));
  }
  std::vector<T> out(static_cast<std::size_t>(m * n));
  MapMat<T>(out.data(), m, n).noalias() = CMapMat<T>(a.data().data(), m, k) * CMapMat<T>(b.data().data(), k, n);
  return make_result<T>("matmul", Shape{m, n}, std::move(out), {a, b}, [a, b, m, k, n](GradContext<T>& ctx) {
    CMapMat<T> g(ctx.grad_output.data(), m, n);
    if (ctx.wants(0)) {
      MapMat<T>(ctx.grad_inputs[0].data(), m, k).noalias() += g * CMapMat<T>(b.data().data(), k, n).transpose();
    }
    if (ctx.wants(1)) {
      MapMat<T>(ctx.grad_inputs[1].data(), k, n).noalias() += CMapMat<T>(a.data().data(), m, k).transpose() * g;
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  require_rank("transpose", x, 2);
  const std::int64_t r = x.dim(0), c = x.dim(1);
  std::vector<T> out(static_cast<std::size_t>(r * c));
  MapMat<T>(out.data(), c, r) = CMapMat<T>(x.data().data(), r, c).transpose();
  return make_result<T>("transpose", Shape{c, r}, std::move(out), {x}, [r, c](GradContext<T>& ctx) {
    MapMat<T>(ctx.grad_inputs[0].data(), r, c) += CMapMat<T>(ctx.grad_output.data(), c, r).transpose();
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape dims) {
  if (shape_numel(dims) != x.numel()) {
    throw ConfigError("reshape: cannot view " + shape_string(x.dims()) + " as " + shape_string(dims));
  }
  auto xd = x.data();
  return make_result<T>("reshape", std::move(dims), std::vector<T>(xd.begin(), xd.end()), {x},
                        [](GradContext<T>& ctx) {
                          auto gx = ctx.grad_inputs[0];
                          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += ctx.grad_output[i];
                        });
}

template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  return reduce_mean(square(sub(a, b)));
}

#define UFSE_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int); \
  template Tensor<T> relu(const Tensor<T>&);                                                 \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                        \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                        \
  template Tensor<T> square(const Tensor<T>&);                                               \
  template Tensor<T> sqrt(const Tensor<T>&);                                                 \
  template Tensor<T> upsample_nearest_2x(const Tensor<T>&);                                  \
  template Tensor<T> maxpool_2x(const Tensor<T>&);                                           \
  template Tensor<T> reduce_sum(const Tensor<T>&);                                           \
  template Tensor<T> reduce_mean(const Tensor<T>&);                                          \
  template Tensor<T> reduce_var(const Tensor<T>&);                                           \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> transpose(const Tensor<T>&);                                            \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                       \
  template Tensor<T> mse(const Tensor<T>&, const Tensor<T>&);

UFSE_INSTANTIATE_OPS(float)
UFSE_INSTANTIATE_OPS(double)

}  // namespace ufse
