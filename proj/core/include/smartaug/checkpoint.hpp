#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smartaug/tensor.hpp"

namespace smartaug {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

inline constexpr char kCheckpointMagic[4] = {'S', 'A', 'U', 'G'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout, all integers little-endian:
//   "SAUG" | u32 version | u32 count
//   count x ( u32 name_len | name bytes | u32 rank | rank x u64 dim | f64 data... )
std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace smartaug
