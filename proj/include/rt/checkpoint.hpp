#pragma once

#include <cstdint>
#include <filesystem>

#include "rt/audio.hpp"
#include "rt/network.hpp"
#include "rt/training.hpp"

namespace rt {

struct ModelCheckpoint {
  Network<float> model;
  std::uint64_t seed = 0;
  Normalization normalization = Normalization::standardize;
  EpochHistory history;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout (little-endian):
///   "RSCK0001" | u32 version | u32 len + architecture text | u64 seed |
///   u8 normalization | u32 epochs x (u32 epoch, f64 train, f64 test, f64 loss) |
///   u32 tensors x (u32 rank, u32 dims[rank], f32 data) | u32 CRC32
std::vector<std::uint8_t> encode_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rt
