#include "dfd/autodiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dfd/error.hpp"

namespace dfd::ad {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw DecodeError("DFDW: truncated record");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::string encode_checkpoint(const std::vector<NamedArray>& arrays) {
  std::string out(kCheckpointMagic, 4);
  out.push_back(static_cast<char>(kCheckpointVersion));
  for (const auto& a : arrays) {
    std::size_t n = 1;
    for (auto d : a.dims) n *= d;
    if (n != a.values.size()) throw ArgumentError("DFDW: array '" + a.name + "' dims do not match data");
    put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    put_u32(out, static_cast<std::uint32_t>(a.dims.size()));
    for (auto d : a.dims) put_u32(out, d);
    for (float f : a.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

std::vector<NamedArray> decode_checkpoint(const std::string& in) {
  if (in.size() < 5 || std::memcmp(in.data(), kCheckpointMagic, 4) != 0) throw DecodeError("DFDW: bad magic");
  if (static_cast<std::uint8_t>(in[4]) != kCheckpointVersion) throw DecodeError("DFDW: unsupported version");
  std::vector<NamedArray> arrays;
  std::size_t pos = 5;
  while (pos < in.size()) {
    NamedArray a;
    const auto name_len = get_u32(in, pos);
    if (pos + name_len > in.size()) throw DecodeError("DFDW: truncated name");
    a.name = in.substr(pos, name_len);
    pos += name_len;
    const auto rank = get_u32(in, pos);
    if (rank > 8) throw DecodeError("DFDW: implausible rank for '" + a.name + "'");
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      a.dims.push_back(get_u32(in, pos));
      n *= a.dims.back();
    }
    if (pos + 4 * n > in.size()) throw DecodeError("DFDW: truncated data for '" + a.name + "'");
    a.values.resize(n);
    for (auto& f : a.values) f = std::bit_cast<float>(get_u32(in, pos));
    arrays.push_back(std::move(a));
  }
  return arrays;
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  const std::string bytes = encode_checkpoint(arrays);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw NotFoundError("no such checkpoint: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes);
}

}  // namespace dfd::ad
