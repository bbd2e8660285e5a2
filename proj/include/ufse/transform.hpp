#pragma once

#include <string>
#include <vector>

#include "ufse/featstats.hpp"
#include "ufse/tensor.hpp"

namespace ufse {

// Per-channel statistics alignment versus covariance-aware alignment.
enum class AlignmentKind { AdaIN, WCT };

AlignmentKind parse_alignment_kind(const std::string& name);
std::string to_string(AlignmentKind kind);

/// out_i = σ_s,i · (x_c,i − μ_c,i)/(σ_c,i + eps) + μ_s,i for every channel i.
FeatureMap adain(const FeatureMap& content, const FeatureMap& style, double eps = 1e-5);

/// Differentiable AdaIN over N×C×H×W tensors (style may differ spatially).
template <typename T>
Tensor<T> adain(const Tensor<T>& content, const Tensor<T>& style, T eps = T(1e-5));

/// (1 − alpha)·content + alpha·transformed; alpha must lie in [0, 1].
FeatureMap blend(const FeatureMap& content, const FeatureMap& transformed, double alpha);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // orthonormal columns, vectors(:, k) ↔ values[k]
  int sweeps = 0;
};

/// Cyclic Jacobi eigensolver for symmetric matrices. Stops once the
/// off-diagonal Frobenius norm drops below 1e-10·‖A‖; at most 100 sweeps.
SymmetricEigen sym_eig(const Matrix& a);

/// Centered content whitened to unit covariance on the eigen-directions whose
/// eigenvalue exceeds eig_floor (the rest are projected out).
FeatureMap whiten(const FeatureMap& content, double eig_floor = 1e-8);

/// Whitening-coloring transform: whiten the content, color it with the style
/// covariance square root and add the style mean.
FeatureMap whiten_color(const FeatureMap& content, const FeatureMap& style, double eig_floor = 1e-8);

FeatureMap align(AlignmentKind kind, const FeatureMap& content, const FeatureMap& style);

}  // namespace ufse
