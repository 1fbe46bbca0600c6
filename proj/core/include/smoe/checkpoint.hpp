#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "smoe/adam.hpp"
#include "smoe/unet.hpp"

namespace smoe {

inline constexpr char kCheckpointMagic[8] = {'S', 'M', 'O', 'E', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout (all integers and floats little-endian):
//
//   magic            8 bytes "SMOECKPT"
//   version          u32
//   config           u32 depth, u32 base_channels, u32 input_channels,
//                    u8 smoe_enabled, u32 tsk_rules, u8 semantic_tap,
//                    u8 standardize_input
//   has_optimizer    u8
//   optimizer        (if has_optimizer) f64 lr, beta1, beta2, eps; u64 step
//   param_count      u32
//   parameters       per parameter: u32 name_len, name bytes, u32 rank,
//                    u64 extents[rank], f64 values[numel]
//   moments          (if has_optimizer) per parameter: f64 m[numel], f64 v[numel]
//   crc32            u32 over every preceding byte (zlib polynomial)
std::vector<std::uint8_t> encode_checkpoint(const Model& model, const AdamState* optimizer = nullptr);

struct LoadedCheckpoint {
  Model model;
  std::optional<AdamState> optimizer;
};

// Throws DataError on bad magic, version mismatch, truncation, checksum failure
// or parameter-set mismatch.
LoadedCheckpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Model& model, const AdamState* optimizer = nullptr);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
// Additionally rejects a checkpoint whose configuration differs from `expected`,
// listing the differing fields.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace smoe
