#pragma once

#include "ufse/tensor.hpp"

namespace ufse {

// Differentiable tensor operations. Every op validates shapes and throws
// ConfigError on mismatch; outputs are recorded on the tape (see make_result).

/// 2-D convolution with zero padding. input N×Cin×H×W, weight Cout×Cin×k×k,
/// bias Cout. (H + 2·pad − k) must be divisible by stride.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride, int pad);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

// Elementwise (Hadamard) product of equally shaped tensors.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T s);

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T s);

template <typename T>
Tensor<T> square(const Tensor<T>& x);

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x);

// Nearest-neighbour 2× upsampling over the two trailing axes of N×C×H×W.
template <typename T>
Tensor<T> upsample_nearest_2x(const Tensor<T>& x);

// 2×2 max pooling with stride 2; H and W must be even.
template <typename T>
Tensor<T> maxpool_2x(const Tensor<T>& x);

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x);

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x);

// Population (divide-by-N) variance over all elements.
template <typename T>
Tensor<T> reduce_var(const Tensor<T>& x);

// 2-D matrix product (M×K)·(K×N).
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape dims);

// Composite: mean of squared differences.
template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace ufse
