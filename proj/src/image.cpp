#include "dfd/image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dfd/error.hpp"

namespace dfd {

Image::Image(int h, int w, int c, float fill)
    : height(h), width(w), channels(c),
      data(static_cast<std::size_t>(h) * w * c, fill) {
  if (h <= 0 || w <= 0 || c <= 0) throw ArgumentError("image dimensions must be positive");
}

Mask::Mask(int h, int w, std::uint8_t fill)
    : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {
  if (h <= 0 || w <= 0) throw ArgumentError("mask dimensions must be positive");
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

}  // namespace

Image resize(const Image& img, int h, int w) {
  if (h < 8 || w < 8) throw ArgumentError("resize target must be at least 8x8");
  if (h == img.height && w == img.width) return img;
  Image out(h, w, img.channels);
  const double sy = static_cast<double>(img.height) / h;
  const double sx = static_cast<double>(img.width) / w;
  for (int y = 0; y < h; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < w; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
        const double bot = (1 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
        out.at(y, x, c) = static_cast<float>((1 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

Mask resize_mask(const Mask& m, int h, int w) {
  if (h <= 0 || w <= 0) throw ArgumentError("resize target must be positive");
  if (h == m.height && w == m.width) return m;
  Mask out(h, w);
  for (int y = 0; y < h; ++y) {
    const int sy = std::min(m.height - 1, static_cast<int>((y + 0.5) * m.height / h));
    for (int x = 0; x < w; ++x) {
      const int sx = std::min(m.width - 1, static_cast<int>((x + 0.5) * m.width / w));
      out.at(y, x) = m.at(sy, sx);
    }
  }
  return out;
}

Image rotate(const Image& img, double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  const double cy = (img.height - 1) / 2.0;
  const double cx = (img.width - 1) / 2.0;
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // Inverse map: output pixel -> source location.
      const double dx = x - cx;
      const double dy = y - cy;
      const double srcx = cs * dx + sn * dy + cx;
      const double srcy = -sn * dx + cs * dy + cy;
      const int x0 = static_cast<int>(std::floor(srcx));
      const int y0 = static_cast<int>(std::floor(srcy));
      const double wx = srcx - x0;
      const double wy = srcy - y0;
      const int xa = reflect101(x0, img.width), xb = reflect101(x0 + 1, img.width);
      const int ya = reflect101(y0, img.height), yb = reflect101(y0 + 1, img.height);
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1 - wx) * img.at(ya, xa, c) + wx * img.at(ya, xb, c);
        const double bot = (1 - wx) * img.at(yb, xa, c) + wx * img.at(yb, xb, c);
        out.at(y, x, c) = static_cast<float>((1 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

Image standardize(const Image& img) {
  if (img.channels != 3) throw ArgumentError("standardize expects a 3-channel image");
  Image out = img;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const auto c = i % 3;
    out.data[i] = (img.data[i] - kImageNetMean[c]) / kImageNetStd[c];
  }
  return out;
}

Image destandardize(const Image& img) {
  if (img.channels != 3) throw ArgumentError("destandardize expects a 3-channel image");
  Image out = img;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const auto c = i % 3;
    out.data[i] = img.data[i] * kImageNetStd[c] + kImageNetMean[c];
  }
  return out;
}

Image to_grayscale(const Image& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) throw ArgumentError("to_grayscale expects a 3-channel image");
  Image out(img.height, img.width, 1);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    const float* px = &img.data[p * 3];
    out.data[p] = 0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2];
  }
  return out;
}

namespace {

std::vector<int> quantize_levels(const Image& gray) {
  std::vector<int> levels(gray.data.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    levels[i] = std::clamp(static_cast<int>(std::lround(gray.data[i] * 255.0f)), 0, 255);
  }
  return levels;
}

int otsu_from_levels(const std::vector<int>& levels) {
  std::array<double, 256> hist{};
  for (int v : levels) hist[v] += 1.0;
  const double total = static_cast<double>(levels.size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];
  double weight_bg = 0.0, sum_bg = 0.0, best = -1.0;
  int threshold = -1;
  for (int t = 0; t < 255; ++t) {
    weight_bg += hist[t];
    sum_bg += t * hist[t];
    const double weight_fg = total - weight_bg;
    if (weight_bg == 0.0 || weight_fg == 0.0) continue;
    const double mean_bg = sum_bg / weight_bg;
    const double mean_fg = (sum_all - sum_bg) / weight_fg;
    const double between = weight_bg * weight_fg * (mean_bg - mean_fg) * (mean_bg - mean_fg);
    if (between > best) {
      best = between;
      threshold = t;
    }
  }
  return threshold;
}

// Minority share of the border above which the border is treated as
// "mixed", i.e. no background class surrounds the object.
constexpr double kMixedBorderShare = 0.25;

}  // namespace

int otsu_threshold(const Image& gray) { return otsu_from_levels(quantize_levels(to_grayscale(gray))); }

Mask foreground_mask(const Image& img) {
  const Image gray = to_grayscale(img);
  const auto levels = quantize_levels(gray);
  const int t = otsu_from_levels(levels);
  Mask out(img.height, img.width, 1);
  if (t < 0) return out;

  std::size_t border = 0, border_above = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (y != 0 && x != 0 && y != img.height - 1 && x != img.width - 1) continue;
      ++border;
      border_above += levels[static_cast<std::size_t>(y) * img.width + x] > t;
    }
  }
  const double share_above = static_cast<double>(border_above) / border;
  if (std::min(share_above, 1.0 - share_above) > kMixedBorderShare) return out;
  const bool fg_above = share_above <= 0.5;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    out.data[i] = static_cast<std::uint8_t>((levels[i] > t) == fg_above);
  }
  return out;
}

Image mask_to_image(const Mask& m) {
  Image out(m.height, m.width, 3);
  for (std::size_t p = 0; p < m.data.size(); ++p) {
    const float v = m.data[p] ? 1.0f : 0.0f;
    out.data[p * 3] = out.data[p * 3 + 1] = out.data[p * 3 + 2] = v;
  }
  return out;
}

}  // namespace dfd
