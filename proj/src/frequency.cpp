#include "dfd/frequency.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

#include "dfd/error.hpp"

namespace dfd {

namespace {

constexpr std::array<double, 5> kBinomial{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

// Separable 5-tap blur with reflect-101 borders, per channel, in double.
std::vector<double> blur(const std::vector<double>& src, int h, int w, int c, double gain) {
  std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = -2; k <= 2; ++k) {
        const int xx = reflect101(x + k, w);
        const double wk = kBinomial[k + 2];
        for (int ch = 0; ch < c; ++ch) {
          tmp[(static_cast<std::size_t>(y) * w + x) * c + ch] +=
              wk * src[(static_cast<std::size_t>(y) * w + xx) * c + ch];
        }
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int k = -2; k <= 2; ++k) {
      const int yy = reflect101(y + k, h);
      const double wk = kBinomial[k + 2] * gain;
      for (int x = 0; x < w; ++x) {
        for (int ch = 0; ch < c; ++ch) {
          out[(static_cast<std::size_t>(y) * w + x) * c + ch] +=
              wk * tmp[(static_cast<std::size_t>(yy) * w + x) * c + ch];
        }
      }
    }
  }
  return out;
}

// FFTW's planner is not thread-safe.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Image pyr_down(const Image& img) {
  if (img.height < 2 || img.width < 2) throw ArgumentError("pyr_down needs at least 2x2 input");
  const std::vector<double> src(img.data.begin(), img.data.end());
  const auto blurred = blur(src, img.height, img.width, img.channels, 1.0);
  Image out(img.height / 2, img.width / 2, img.channels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = static_cast<float>(
            blurred[(static_cast<std::size_t>(2 * y + 1) * img.width + 2 * x + 1) * img.channels + c]);
      }
    }
  }
  return out;
}

Image pyr_up(const Image& img, int target_h, int target_w) {
  if (std::abs(target_h - 2 * img.height) > 1 || std::abs(target_w - 2 * img.width) > 1 ||
      target_h < 2 || target_w < 2) {
    throw ArgumentError("pyr_up target must be twice the source size (+-1)");
  }
  std::vector<double> stuffed(static_cast<std::size_t>(target_h) * target_w * img.channels, 0.0);
  for (int y = 0; y < img.height && 2 * y + 1 < target_h; ++y) {
    for (int x = 0; x < img.width && 2 * x + 1 < target_w; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        stuffed[(static_cast<std::size_t>(2 * y + 1) * target_w + 2 * x + 1) * img.channels + c] =
            img.at(y, x, c);
      }
    }
  }
  const auto blurred = blur(stuffed, target_h, target_w, img.channels, 4.0);
  Image out(target_h, target_w, img.channels);
  std::transform(blurred.begin(), blurred.end(), out.data.begin(),
                 [](double v) { return static_cast<float>(v); });
  return out;
}

FrequencyPair split_frequency(const Image& img) {
  if (img.height % 2 != 0 || img.width % 2 != 0) {
    throw ArgumentError("split_frequency needs even dimensions");
  }
  FrequencyPair pair;
  pair.low = pyr_up(pyr_down(img), img.height, img.width);
  pair.high = img;
  for (std::size_t i = 0; i < img.data.size(); ++i) pair.high.data[i] = img.data[i] - pair.low.data[i];
  return pair;
}

Spectrum dft2(const Image& img) {
  const Image gray = img.channels == 1 ? img : to_grayscale(img);
  const int h = gray.height, w = gray.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  fftw_complex* buf = fftw_alloc_complex(n);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(h, w, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n; ++i) {
    buf[i][0] = gray.data[i];
    buf[i][1] = 0.0;
  }
  fftw_execute(plan);
  Spectrum s{h, w, std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    s.real[i] = buf[i][0];
    s.imag[i] = buf[i][1];
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return s;
}

AmplitudePhase amplitude_phase(const Spectrum& s) {
  AmplitudePhase ap{s.height, s.width, std::vector<double>(s.real.size()),
                    std::vector<double>(s.real.size())};
  for (std::size_t i = 0; i < s.real.size(); ++i) {
    const double re = s.real[i], im = s.imag[i];
    ap.amplitude[i] = std::hypot(re, im);
    double ph = (re == 0.0 && im == 0.0) ? 0.0 : std::atan2(im, re);
    if (ph == -M_PI) ph = M_PI;
    ap.phase[i] = ph == 0.0 ? 0.0 : ph;  // folds -0.0
  }
  return ap;
}

Spectrum fftshift(const Spectrum& s) {
  Spectrum out = s;
  for (int u = 0; u < s.height; ++u) {
    for (int v = 0; v < s.width; ++v) {
      const int su = (u + s.height / 2) % s.height;
      const int sv = (v + s.width / 2) % s.width;
      out.real[out.index(su, sv)] = s.real[s.index(u, v)];
      out.imag[out.index(su, sv)] = s.imag[s.index(u, v)];
    }
  }
  return out;
}

RadialProfile radial_energy(const Spectrum& centered) {
  const int r_max = std::min(centered.height, centered.width) / 2;
  RadialProfile p;
  p.radius.resize(r_max + 1);
  p.energy.assign(r_max + 1, 0.0);
  for (int r = 0; r <= r_max; ++r) p.radius[r] = r;
  const double cu = centered.height / 2, cv = centered.width / 2;
  for (int u = 0; u < centered.height; ++u) {
    for (int v = 0; v < centered.width; ++v) {
      const double d = std::hypot(u - cu, v - cv);
      const int r = std::min(static_cast<int>(std::lround(d)), r_max);
      p.energy[r] += std::abs(centered.at(u, v));
    }
  }
  return p;
}

RadialProfile radial_energy_of(const Image& img) { return radial_energy(fftshift(dft2(img))); }

std::array<std::uint64_t, 256> gray_histogram(const Image& img) {
  const Image gray = to_grayscale(img);
  std::array<std::uint64_t, 256> counts{};
  for (float v : gray.data) {
    counts[std::clamp(static_cast<int>(std::lround(v * 255.0f)), 0, 255)] += 1;
  }
  return counts;
}

double high_band_energy(const RadialProfile& profile) {
  const int r_max = profile.radius.empty() ? 0 : profile.radius.back();
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < profile.radius.size(); ++i) {
    if (2 * profile.radius[i] > r_max) {
      sum += profile.energy[i];
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

SetSpectrum analyze_set(const std::vector<Image>& images) {
  if (images.empty()) throw ArgumentError("analyze_set: empty image set");
  SetSpectrum out;
  out.images = images.size();
  for (const auto& img : images) {
    if (img.height != images.front().height || img.width != images.front().width) {
      throw ArgumentError("analyze_set: images differ in size");
    }
    const RadialProfile p = radial_energy_of(img);
    if (out.mean_profile.radius.empty()) {
      out.mean_profile.radius = p.radius;
      out.mean_profile.energy.assign(p.energy.size(), 0.0);
    }
    for (std::size_t r = 0; r < p.energy.size(); ++r) out.mean_profile.energy[r] += p.energy[r];
    const auto counts = gray_histogram(img);
    const double total = static_cast<double>(img.height) * img.width;
    for (std::size_t b = 0; b < counts.size(); ++b) out.mean_histogram[b] += static_cast<double>(counts[b]) / total;
  }
  const double n = static_cast<double>(images.size());
  for (auto& e : out.mean_profile.energy) e /= n;
  for (auto& h : out.mean_histogram) h /= n;
  out.high_band = high_band_energy(out.mean_profile);
  return out;
}

double histogram_l1(const std::array<double, 256>& a, const std::array<double, 256>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

}  // namespace dfd
