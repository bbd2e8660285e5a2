#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ufse/tensor.hpp"

namespace ufse {

/// Tagged activations captured at the network's tap layers, shallow to deep.
template <typename T>
class BasicFeatureSet {
 public:
  void add(std::string tag, Tensor<T> value) { taps_.emplace_back(std::move(tag), std::move(value)); }

  bool contains(const std::string& tag) const {
    for (const auto& [t, v] : taps_) {
      if (t == tag) return true;
    }
    return false;
  }

  const Tensor<T>& at(const std::string& tag) const {
    for (const auto& [t, v] : taps_) {
      if (t == tag) return v;
    }
    throw UsageError("feature set has no tap '" + tag + "'");
  }

  std::vector<std::string> tags() const {
    std::vector<std::string> out;
    for (const auto& [t, v] : taps_) out.push_back(t);
    return out;
  }

  std::size_t size() const { return taps_.size(); }
  auto begin() const { return taps_.begin(); }
  auto end() const { return taps_.end(); }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> taps_;
};

using FeatureSet = BasicFeatureSet<float>;

}  // namespace ufse
