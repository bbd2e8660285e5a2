#include "ufse/optim.hpp"

#include <cmath>

namespace ufse {

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
      state.v.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw UsageError("optimizer state does not match the parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (static_cast<std::int64_t>(state.m[i].size()) != params[i].numel()) {
      throw UsageError("optimizer state shape mismatch at parameter " + std::to_string(i));
    }
    if (!params[i].has_grad()) continue;
    for (T g : params[i].grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericalError("non-finite gradient in parameter " + std::to_string(i) + " " +
                             shape_string(params[i].dims()) + "; update aborted");
      }
    }
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    auto w = params[i].mutable_data();
    const bool has = params[i].has_grad();
    std::span<const T> g = has ? params[i].grad() : std::span<const T>{};
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double gk = has ? static_cast<double>(g[k]) : 0.0;
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * gk;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * gk * gk;
      const double update = lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + state.eps);
      if (update != 0.0) w[k] = static_cast<T>(static_cast<double>(w[k]) - update);
    }
  }
}

template void adam_step<float>(std::vector<Tensor<float>>&, AdamState&, double);
template void adam_step<double>(std::vector<Tensor<double>>&, AdamState&, double);

}  // namespace ufse
