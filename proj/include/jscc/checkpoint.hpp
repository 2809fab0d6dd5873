#pragma once

#include <filesystem>
#include <iosfwd>

#include "jscc/nn.hpp"

namespace jscc {

// Binary layout, all integers little-endian:
//   "JSCCCKPT" | u32 version | u32 block count
//   per block: u32 name length | name bytes | u32 rank | u32 extents[rank] |
//              float32 values[product of extents]
inline constexpr char kCheckpointMagic[8] = {'J', 'S', 'C', 'C', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const ModelParams& params);
/// Throws std::runtime_error on a bad magic, unknown version or truncation.
ModelParams read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace jscc
