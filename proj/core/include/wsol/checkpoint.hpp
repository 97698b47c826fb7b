#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "wsol/model.hpp"

namespace wsol {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian):
//   "WSCK" | u32 version | u32 block count
//   per block: u32 name length | UTF-8 name | u32 rank | u64 extents[rank] | f64 values[numel]
// Blocks follow TinyBackbone::parameters() order. The model shape is
// recovered from the block shapes.

std::vector<std::uint8_t> encode_checkpoint(const TinyBackbone& model);
/// Throws FormatError on bad magic, unsupported version, truncation, or
/// missing/inconsistent parameter blocks.
TinyBackbone decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const TinyBackbone& model);
TinyBackbone load_checkpoint(const std::filesystem::path& path);

}  // namespace wsol
