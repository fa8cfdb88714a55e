#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "dfd/error.hpp"
#include "dfd/image.hpp"

namespace dfd {
namespace fs = std::filesystem;

namespace {

bool has_png_signature(const std::string& head) {
  return head.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(head.data()), 0, 8) == 0;
}

std::string read_all(const fs::path& path) {
  if (!fs::exists(path)) throw NotFoundError("no such file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Raw8 {
  int height = 0, width = 0, channels = 0;
  std::vector<std::uint8_t> bytes;
};

Raw8 decode_png(const std::string& payload, const fs::path& path, bool gray) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, payload.data(), payload.size())) {
    throw DecodeError("malformed PNG " + path.string() + ": " + image.message);
  }
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Raw8 raw{static_cast<int>(image.height), static_cast<int>(image.width), gray ? 1 : 3, {}};
  raw.bytes.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.bytes.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DecodeError("malformed PNG " + path.string() + ": " + image.message);
  }
  return raw;
}

// Binary netpbm: P5 (gray) or P6 (color), maxval <= 255.
Raw8 decode_pnm(const std::string& payload, const fs::path& path) {
  std::size_t pos = 2;
  auto next_int = [&]() -> long {
    while (pos < payload.size()) {
      if (payload[pos] == '#') {
        while (pos < payload.size() && payload[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(payload[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::size_t start = pos;
    while (pos < payload.size() && std::isdigit(static_cast<unsigned char>(payload[pos]))) ++pos;
    if (start == pos) throw DecodeError("malformed PNM header in " + path.string());
    return std::stol(payload.substr(start, pos - start));
  };
  const bool color = payload[1] == '6';
  const long w = next_int(), h = next_int(), maxval = next_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw DecodeError("unsupported PNM geometry in " + path.string());
  }
  ++pos;  // single whitespace before raster
  const int c = color ? 3 : 1;
  const std::size_t need = static_cast<std::size_t>(w) * h * c;
  if (payload.size() < pos + need) throw DecodeError("truncated PNM raster in " + path.string());
  Raw8 raw{static_cast<int>(h), static_cast<int>(w), c, {}};
  raw.bytes.assign(payload.begin() + pos, payload.begin() + pos + need);
  if (maxval != 255) {
    for (auto& b : raw.bytes) b = static_cast<std::uint8_t>(std::lround(b * 255.0 / maxval));
  }
  return raw;
}

Raw8 decode_any(const fs::path& path, bool gray) {
  const std::string payload = read_all(path);
  if (has_png_signature(payload)) return decode_png(payload, path, gray);
  if (payload.size() >= 2 && payload[0] == 'P' && (payload[1] == '5' || payload[1] == '6')) {
    return decode_pnm(payload, path);
  }
  throw DecodeError("unrecognized image payload: " + path.string());
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

void write_png_bytes(const std::vector<std::uint8_t>& bytes, int h, int w, int c,
                     const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = c == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

void write_pnm_bytes(const std::vector<std::uint8_t>& bytes, int h, int w, int c,
                     const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (c == 1 ? "P5" : "P6") << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::string lower_ext(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext;
}

}  // namespace

Image load_image(const fs::path& path) {
  const Raw8 raw = decode_any(path, false);
  Image img(raw.height, raw.width, 3);
  const std::size_t n = raw.bytes.size() / raw.channels;
  for (std::size_t p = 0; p < n; ++p) {
    for (int ch = 0; ch < 3; ++ch) {
      const std::uint8_t b = raw.bytes[p * raw.channels + (raw.channels == 3 ? ch : 0)];
      img.data[p * 3 + ch] = b / 255.0f;
    }
  }
  return img;
}

Mask load_mask(const fs::path& path) {
  const Raw8 raw = decode_any(path, true);
  Mask m(raw.height, raw.width);
  for (std::size_t p = 0; p < m.data.size(); ++p) {
    int v = raw.bytes[p * raw.channels];
    if (raw.channels == 3) {
      v = (raw.bytes[p * 3] + raw.bytes[p * 3 + 1] + raw.bytes[p * 3 + 2]) / 3;
    }
    m.data[p] = v > 127;
  }
  return m;
}

void save_png(const Image& img, const fs::path& path) {
  if (img.channels != 1 && img.channels != 3) throw ArgumentError("PNG export needs 1 or 3 channels");
  std::vector<std::uint8_t> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), to_byte);
  write_png_bytes(bytes, img.height, img.width, img.channels, path);
}

void save_pnm(const Image& img, const fs::path& path) {
  if (img.channels != 1 && img.channels != 3) throw ArgumentError("PNM export needs 1 or 3 channels");
  std::vector<std::uint8_t> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), to_byte);
  write_pnm_bytes(bytes, img.height, img.width, img.channels, path);
}

void save_mask(const Mask& m, const fs::path& path) {
  std::vector<std::uint8_t> bytes(m.data.size());
  std::transform(m.data.begin(), m.data.end(), bytes.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
  if (lower_ext(path) == ".png") {
    write_png_bytes(bytes, m.height, m.width, 1, path);
  } else {
    write_pnm_bytes(bytes, m.height, m.width, 1, path);
  }
}

}  // namespace dfd
