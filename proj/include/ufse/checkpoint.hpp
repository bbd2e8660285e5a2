#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ufse/tensor.hpp"

namespace ufse {

struct NamedTensor {
  std::string name;
  Shape dims;
  std::vector<float> data;

  bool operator==(const NamedTensor&) const = default;
};

/// Named tensor table. On disk: "UFSE", u32 version, u32 count, then per
/// tensor u16 name length, name bytes, u8 rank, rank×u64 dims and the f32
/// data; every integer and float little-endian.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ufse
