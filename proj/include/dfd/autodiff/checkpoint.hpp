#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dfd::ad {

struct NamedArray {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

inline constexpr char kCheckpointMagic[4] = {'D', 'F', 'D', 'W'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

/// DFDW layout: magic "DFDW", version byte, then until EOF one record per
/// array: u32 name length, name bytes, u32 rank, rank x u32 dims, f32 values.
/// All integers and floats little-endian.
void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);
std::string encode_checkpoint(const std::vector<NamedArray>& arrays);
std::vector<NamedArray> decode_checkpoint(const std::string& bytes);

}  // namespace dfd::ad
