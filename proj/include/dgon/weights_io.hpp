#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dgon/model.hpp"

namespace dgon {

// Binary layout, all integers little-endian:
//   "DGON" | u32 version | u32 config length | config JSON
//   | per tensor: u32 name length, name, u32 rank, u64 extents[rank], f64 payload
//   | u32 CRC32 of every preceding byte
inline constexpr std::uint32_t kWeightFormatVersion = 1;

std::vector<unsigned char> serialize_model(const DeepGraphONet& model);
/// Throws FormatError on bad magic, version mismatch, truncation or checksum failure.
DeepGraphONet deserialize_model(const std::vector<unsigned char>& bytes);

void save_model(const DeepGraphONet& model, const std::filesystem::path& path);
DeepGraphONet load_model(const std::filesystem::path& path);

/// The JSON config block stored in a weight file.
std::string weight_config_block(const DeepGraphONet& model);

}  // namespace dgon
