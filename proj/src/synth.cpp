#include "dfd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "dfd/error.hpp"
#include "dfd/parallel.hpp"
#include "dfd/rng.hpp"

namespace dfd {
namespace fs = std::filesystem;

namespace {

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double lattice_dot(std::uint64_t seed, long ix, long iy, double dx, double dy) {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x9e3779b1ULL +
                                                       (static_cast<std::uint64_t>(iy) << 32)));
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(h >> 11) * 0x1.0p-53;
  return std::cos(angle) * dx + std::sin(angle) * dy;
}

}  // namespace

PerlinField perlin(int h, int w, int period, std::uint64_t seed) {
  if (period <= 0) throw ArgumentError("perlin period must be positive");
  if (h <= 0 || w <= 0) throw ArgumentError("perlin dimensions must be positive");
  PerlinField f{h, w, period, seed, std::vector<float>(static_cast<std::size_t>(h) * w)};
  for (int y = 0; y < h; ++y) {
    const double v = static_cast<double>(y) * period / h;
    const long iy = static_cast<long>(std::floor(v));
    const double fy = v - iy;
    const double sy = fade(fy);
    for (int x = 0; x < w; ++x) {
      const double u = static_cast<double>(x) * period / w;
      const long ix = static_cast<long>(std::floor(u));
      const double fx = u - ix;
      const double sx = fade(fx);
      const double n00 = lattice_dot(seed, ix, iy, fx, fy);
      const double n10 = lattice_dot(seed, ix + 1, iy, fx - 1.0, fy);
      const double n01 = lattice_dot(seed, ix, iy + 1, fx, fy - 1.0);
      const double n11 = lattice_dot(seed, ix + 1, iy + 1, fx - 1.0, fy - 1.0);
      const double top = n00 + sx * (n10 - n00);
      const double bot = n01 + sx * (n11 - n01);
      // sqrt(2) stretches the unit-gradient range (+-sqrt(2)/2) to +-1.
      const double value = std::numbers::sqrt2 * (top + sy * (bot - top));
      f.data[static_cast<std::size_t>(y) * w + x] = static_cast<float>(std::clamp(value, -1.0, 1.0));
    }
  }
  return f;
}

Mask perlin_mask(const PerlinField& p, double threshold) {
  Mask m(p.height, p.width);
  for (std::size_t i = 0; i < p.data.size(); ++i) m.data[i] = p.data[i] > threshold;
  return m;
}

Mask compose_mask(const Mask& foreground, const Mask& noise) {
  if (foreground.height != noise.height || foreground.width != noise.width) {
    throw ArgumentError("compose_mask: mask dimensions differ");
  }
  Mask m(foreground.height, foreground.width);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = foreground.data[i] & noise.data[i];
  return m;
}

AnomalySample blend_anomaly(const Image& img, const Image& texture, const Mask& mask, double beta) {
  if (!img.same_dims(texture)) throw ArgumentError("blend_anomaly: texture dimensions differ");
  if (mask.height != img.height || mask.width != img.width) {
    throw ArgumentError("blend_anomaly: mask dimensions differ");
  }
  if (!(beta >= 0.0 && beta <= 1.0)) throw ArgumentError("blend_anomaly: beta must be in [0,1]");
  AnomalySample s;
  s.image = img;
  s.normal = img;
  s.mask = mask;
  s.beta = beta;
  const float b = static_cast<float>(beta);
  for (std::size_t p = 0; p < mask.data.size(); ++p) {
    if (!mask.data[p]) continue;
    for (int c = 0; c < img.channels; ++c) {
      const std::size_t i = p * img.channels + c;
      s.image.data[i] = (1.0f - b) * img.data[i] + b * texture.data[i];
    }
  }
  s.is_anomalous = !mask.empty_set();
  return s;
}

Image procedural_texture(int h, int w, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const int base_period = 2 << uniform_index(rng, 3);  // 2, 4 or 8
  const int octaves = 4;
  std::array<float, 3> color_a{}, color_b{};
  for (int c = 0; c < 3; ++c) {
    color_a[c] = static_cast<float>(uniform(rng));
    color_b[c] = static_cast<float>(uniform(rng));
  }
  std::vector<double> acc(static_cast<std::size_t>(h) * w, 0.0);
  double norm = 0.0;
  for (int o = 0; o < octaves; ++o) {
    const double amp = std::pow(0.5, o);
    const auto field = perlin(h, w, base_period << o, derive_seed(seed, static_cast<std::uint64_t>(o)));
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += amp * field.data[i];
    norm += amp;
  }
  // Channel-independent fine grain keeps the texture from being a pure gradient.
  const auto grain = perlin(h, w, std::max(1, std::min(h, w) / 2), derive_seed(seed, "grain"));
  Image out(h, w, 3);
  for (std::size_t p = 0; p < acc.size(); ++p) {
    const double t = std::clamp(0.5 + 0.5 * acc[p] / norm * 1.6, 0.0, 1.0);
    for (int c = 0; c < 3; ++c) {
      const double v = color_a[c] + (color_b[c] - color_a[c]) * t + 0.08 * grain.data[p];
      out.data[p * 3 + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

std::vector<fs::path> list_texture_files(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) return files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".ppm" || ext == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::size_t texture_pick(std::uint64_t seed, std::size_t count) {
  Rng rng = make_rng(derive_seed(seed, "texture-pick"));
  return static_cast<std::size_t>(uniform_index(rng, count));
}

Image texture_source(const std::string& mode, std::uint64_t seed, int h, int w, const fs::path& dir) {
  if (mode == "procedural") return procedural_texture(h, w, seed);
  if (mode != "folder") throw ConfigError("unknown texture mode '" + mode + "'");
  const auto files = list_texture_files(dir);
  if (files.empty()) throw ConfigError("texture folder has no images: " + dir.string());
  Image tex = load_image(files[texture_pick(seed, files.size())]);
  if (tex.height == h && tex.width == w) return tex;
  if (h < 8 || w < 8) throw ArgumentError("texture target too small");
  return resize(tex, h, w);
}

AnomalySample augment_one(const Image& img, const AugmentPolicy& policy, std::uint64_t seed,
                          std::size_t index) {
  const std::uint64_t sample_seed = derive_seed(seed, static_cast<std::uint64_t>(index));
  Rng rng = make_rng(sample_seed);
  const double angle = uniform(rng, -policy.max_rotation_deg, policy.max_rotation_deg);
  Image normal = policy.rotate ? rotate(img, angle) : img;

  AnomalySample s;
  if (uniform(rng) < policy.anomaly_prob) {
    const Mask fg = foreground_mask(normal);
    Mask mask(normal.height, normal.width);
    for (int attempt = 0; attempt < policy.mask_attempts && mask.empty_set(); ++attempt) {
      const int period = policy.perlin_periods[uniform_index(rng, policy.perlin_periods.size())];
      const auto field = perlin(normal.height, normal.width, period, rng());
      mask = compose_mask(fg, perlin_mask(field, policy.perlin_threshold));
    }
    const double beta = uniform(rng, policy.beta_min, policy.beta_max);
    const Image tex = texture_source(policy.texture_mode, rng(), normal.height, normal.width,
                                     policy.texture_dir);
    s = blend_anomaly(normal, tex, mask, beta);
    if (!s.is_anomalous) s.beta = 0.0;
  } else {
    s.image = normal;
    s.normal = std::move(normal);
    s.mask = Mask(img.height, img.width);
  }
  return s;
}

std::vector<AnomalySample> augment(const Image& img, const AugmentPolicy& policy, std::uint64_t seed) {
  if (policy.count < 1) throw ArgumentError("augment: count must be >= 1");
  std::vector<AnomalySample> out(static_cast<std::size_t>(policy.count));
  parallel_for(out.size(), [&](std::size_t k) { out[k] = augment_one(img, policy, seed, k); });
  return out;
}

std::vector<float> gaussian_noise(std::size_t count, const NoiseSpec& spec) {
  if (!(spec.std > 0.0)) throw ArgumentError("noise std must be positive");
  Rng rng = make_rng(spec.seed);
  std::vector<float> out(count);
  for (auto& v : out) v = static_cast<float>(spec.mean + spec.std * standard_normal(rng));
  return out;
}

FeatureMap perturb_features(const FeatureMap& q, const NoiseSpec& spec) {
  FeatureMap out = q;
  const auto noise = gaussian_noise(q.data.size(), spec);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += noise[i];
  return out;
}

void export_samples(const std::vector<AnomalySample>& samples, const fs::path& dir,
                    const std::string& prefix) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw IoError("cannot write manifest in " + dir.string());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char stem[64];
    std::snprintf(stem, sizeof stem, "%s_%04zu", prefix.c_str(), i);
    const std::string image_name = std::string(stem) + ".png";
    const std::string mask_name = std::string(stem) + "_mask.png";
    save_png(samples[i].image, dir / image_name);
    save_mask(samples[i].mask, dir / mask_name);
    char beta[32];
    std::snprintf(beta, sizeof beta, "%.6f", samples[i].beta);
    manifest << image_name << ' ' << mask_name << ' ' << (samples[i].is_anomalous ? 1 : 0) << ' '
             << beta << '\n';
  }
  if (!manifest) throw IoError("short write to manifest in " + dir.string());
}

}  // namespace dfd
