#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace dfd {

/// Row-major, channel-interleaved raster. Values are in [0,1] until
/// standardize() is applied.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f);

  float& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool same_dims(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

/// Binary raster, one byte per pixel holding 0 or 1.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int h, int w, std::uint8_t fill = 0);

  std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;
  bool empty_set() const { return count() == 0; }
};

inline constexpr std::array<float, 3> kImageNetMean{0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kImageNetStd{0.229f, 0.224f, 0.225f};

// --- I/O -------------------------------------------------------------------

/// Decodes PNG (8/16-bit, gray or color) or binary PPM/PGM into a 3-channel
/// image scaled to [0,1]. Gray sources are replicated across channels.
Image load_image(const std::filesystem::path& path);
/// Loads a gray PNG/PGM mask; pixels > 127 become 1.
Mask load_mask(const std::filesystem::path& path);
/// Writes 8-bit PNG (1 or 3 channels); values are clamped to [0,1].
void save_png(const Image& img, const std::filesystem::path& path);
/// Writes binary PPM (3 channels) or PGM (1 channel).
void save_pnm(const Image& img, const std::filesystem::path& path);
/// Masks persist as 8-bit PGM or PNG with values {0,255}, chosen by extension.
void save_mask(const Mask& m, const std::filesystem::path& path);

// --- geometry and color ------------------------------------------------------

/// Bilinear resample with half-pixel centers and edge clamping.
Image resize(const Image& img, int h, int w);
/// Nearest-sample resize for masks.
Mask resize_mask(const Mask& m, int h, int w);
/// Rotates about the image center (bilinear, reflect-101 border).
Image rotate(const Image& img, double degrees);

Image standardize(const Image& img);
Image destandardize(const Image& img);
Image to_grayscale(const Image& img);

/// Otsu threshold (0..255 level) of the 8-bit quantized luminance; -1 when
/// the image is constant.
int otsu_threshold(const Image& gray);

/// Otsu binarization of the luminance. The class that is the minority on the
/// image border is the foreground. Constant images, and images whose border is
/// itself mixed (full-frame textures), yield an all-ones mask.
Mask foreground_mask(const Image& img);

Image mask_to_image(const Mask& m);

}  // namespace dfd
