#pragma once

#include <cstdint>
#include <vector>

#include "ufse/tensor.hpp"

namespace ufse {

struct AdamState {
  std::vector<std::vector<double>> m;  // first moments, one per parameter
  std::vector<std::vector<double>> v;  // second moments
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update of every parameter from its accumulated grad.
// A parameter without a grad buffer counts as having a zero gradient. Any
// non-finite gradient aborts before a single parameter changes.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState& state, double lr);

/// Owns an AdamState for a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Tensor<float>> params, double lr) : params_(std::move(params)), lr_(lr) {}

  void step() { adam_step(params_, state_, lr_); }
  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }
  double lr() const { return lr_; }
  const AdamState& state() const { return state_; }

 private:
  std::vector<Tensor<float>> params_;
  AdamState state_;
  double lr_;
};

}  // namespace ufse
