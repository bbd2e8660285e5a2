#pragma once

// JSON mappings shared by the trainer and the checkpoint-directory loader.
// Unknown keys are rejected so typos in config files surface immediately.

#include <set>
#include <string>

#include <json.hpp>

#include "ufse/losses.hpp"
#include "ufse/netgraph.hpp"

namespace ufse {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown " + what + " key '" + key + "'");
  }
}

inline void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = {{"widths", c.widths},           {"convs_per_block", c.convs_per_block}, {"kernel", c.kernel},
       {"content_tap", c.content_tap}, {"style_taps", c.style_taps},           {"input_channels", c.input_channels}};
}

inline void from_json(const nlohmann::json& j, NetworkConfig& c) {
  reject_unknown_keys(j, {"widths", "convs_per_block", "kernel", "content_tap", "style_taps", "input_channels"},
                      "network");
  if (j.contains("widths")) j.at("widths").get_to(c.widths);
  if (j.contains("convs_per_block")) j.at("convs_per_block").get_to(c.convs_per_block);
  if (j.contains("kernel")) j.at("kernel").get_to(c.kernel);
  if (j.contains("content_tap")) j.at("content_tap").get_to(c.content_tap);
  if (j.contains("style_taps")) j.at("style_taps").get_to(c.style_taps);
  if (j.contains("input_channels")) j.at("input_channels").get_to(c.input_channels);
}

inline void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"content", w.content}, {"style", w.style}, {"uncorrelation", w.uncorrelation}};
}

inline void from_json(const nlohmann::json& j, LossWeights& w) {
  reject_unknown_keys(j, {"content", "style", "uncorrelation"}, "loss weight");
  if (j.contains("content")) j.at("content").get_to(w.content);
  if (j.contains("style")) j.at("style").get_to(w.style);
  if (j.contains("uncorrelation")) j.at("uncorrelation").get_to(w.uncorrelation);
}

}  // namespace ufse
