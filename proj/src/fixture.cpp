#include <algorithm>
#include <cmath>
#include <numbers>

#include "dfd/error.hpp"
#include "dfd/eval.hpp"
#include "dfd/rng.hpp"
#include "dfd/synth.hpp"

namespace dfd {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

void put(Image& img, int y, int x, double r, double g, double b) {
  img.at(y, x, 0) = clamp01(r);
  img.at(y, x, 1) = clamp01(g);
  img.at(y, x, 2) = clamp01(b);
}

Image weave(int n, Rng& rng) {
  const double angle = uniform(rng, -0.05, 0.05);
  const double p1 = uniform(rng, 0, kTwoPi), p2 = uniform(rng, 0, kTwoPi);
  const double period = 8.0;
  Image img(n, n, 3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double u = x * std::cos(angle) + y * std::sin(angle);
      const double v = -x * std::sin(angle) + y * std::cos(angle);
      const double a = std::sin(kTwoPi * u / period + p1);
      const double b = std::sin(kTwoPi * v / period + p2);
      // Over/under crossing: the dominant thread alternates per cell.
      const double t = 0.5 + 0.22 * (a > b ? a : b) + 0.02 * standard_normal(rng);
      put(img, y, x, 0.85 * t + 0.05, 0.72 * t + 0.05, 0.5 * t + 0.05);
    }
  }
  return img;
}

Image granite(int n, Rng& rng) {
  const std::uint64_t s = rng();
  const PerlinField f1 = perlin(n, n, 4, derive_seed(s, 1));
  const PerlinField f2 = perlin(n, n, 8, derive_seed(s, 2));
  const PerlinField f3 = perlin(n, n, 16, derive_seed(s, 3));
  Image img(n, n, 3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double t = 0.5 + 0.12 * f1.at(y, x) + 0.08 * f2.at(y, x) + 0.05 * f3.at(y, x) +
                       0.04 * standard_normal(rng);
      put(img, y, x, t + 0.04, t, t - 0.02);
    }
  }
  return img;
}

Image tile(int n, Rng& rng) {
  const int cell = 16;
  const int ox = static_cast<int>(uniform_index(rng, cell)), oy = static_cast<int>(uniform_index(rng, cell));
  Image img(n, n, 3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int cx = (x + ox) % cell, cy = (y + oy) % cell;
      const bool grout = cx < 2 || cy < 2;
      const bool dark = (((x + ox) / cell) + ((y + oy) / cell)) % 2 == 0;
      const double base = grout ? 0.78 : (dark ? 0.38 : 0.58);
      const double t = base + 0.015 * standard_normal(rng);
      put(img, y, x, t, t, t + 0.03);
    }
  }
  return img;
}

Image disc(int n, Rng& rng) {
  const double cy = n / 2.0 + uniform(rng, -3, 3), cx = n / 2.0 + uniform(rng, -3, 3);
  const double radius = n * uniform(rng, 0.3, 0.34);
  Image img(n, n, 3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double d = std::hypot(y + 0.5 - cy, x + 0.5 - cx);
      const double noise = 0.015 * standard_normal(rng);
      if (d <= radius) {
        const double shade = 0.85 - 0.25 * (d / radius) * (d / radius);
        put(img, y, x, shade + noise, 0.75 * shade + noise, 0.4 * shade + noise);
      } else {
        put(img, y, x, 0.1 + noise, 0.1 + noise, 0.12 + noise);
      }
    }
  }
  return img;
}

Image carpet(int n, Rng& rng) {
  const double period = 8.0;
  const double ox = uniform(rng, 0, period), oy = uniform(rng, 0, period);
  Image img(n, n, 3);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double fx = std::fmod(x + ox, period) - period / 2, fy = std::fmod(y + oy, period) - period / 2;
      const double w = std::clamp(2.6 - std::hypot(fx, fy), 0.0, 1.0);
      const double noise = 0.03 * standard_normal(rng);
      put(img, y, x, 0.3 + 0.3 * w + noise, 0.34 + 0.3 * w + noise, 0.5 + 0.3 * w + noise);
    }
  }
  return img;
}

double luminance(const Image& img, int y, int x) {
  return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

/// Saturated defect color whose brightness contrasts with the mean
/// luminance under the mask.
std::array<double, 3> contrast_color(const Image& img, const Mask& m, Rng& rng) {
  double sum = 0;
  std::size_t n = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (m.at(y, x)) {
        sum += luminance(img, y, x);
        ++n;
      }
    }
  }
  const double mean = n ? sum / static_cast<double>(n) : 0.5;
  const double value = mean > 0.5 ? uniform(rng, 0.2, 0.4) : uniform(rng, 0.85, 1.0);
  const double saturation = uniform(rng, 0.6, 0.9);
  const double hue = uniform(rng, 0.0, 6.0);
  const double chroma = value * saturation;
  const double x = chroma * (1 - std::abs(std::fmod(hue, 2.0) - 1));
  std::array<double, 3> rgb{};
  switch (static_cast<int>(hue)) {
    case 0: rgb = {chroma, x, 0}; break;
    case 1: rgb = {x, chroma, 0}; break;
    case 2: rgb = {0, chroma, x}; break;
    case 3: rgb = {0, x, chroma}; break;
    case 4: rgb = {x, 0, chroma}; break;
    default: rgb = {chroma, 0, x}; break;
  }
  for (auto& v : rgb) v += value - chroma;
  return rgb;
}

}  // namespace

const std::vector<std::string>& fixture_categories() {
  static const std::vector<std::string> names{"weave", "granite", "tile", "disc", "carpet"};
  return names;
}

Image fixture_normal(const std::string& category, int size, std::uint64_t seed) {
  if (size < 16) throw ArgumentError("fixture images must be at least 16 pixels");
  Rng rng = make_rng(seed);
  if (category == "weave") return weave(size, rng);
  if (category == "granite") return granite(size, rng);
  if (category == "tile") return tile(size, rng);
  if (category == "disc") return disc(size, rng);
  if (category == "carpet") return carpet(size, rng);
  throw ConfigError("unknown fixture category '" + category + "'");
}

FixtureDefect fixture_defect(const Image& normal, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const int n = normal.height;
  const Mask fg = foreground_mask(normal);
  FixtureDefect out{normal, Mask(normal.height, normal.width), ""};

  // Anchor on a foreground pixel away from the border.
  const int margin = std::max(4, n / 8);
  int cy = n / 2, cx = n / 2;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const int y = margin + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - 2 * margin)));
    const int x = margin + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - 2 * margin)));
    if (fg.at(y, x)) {
      cy = y;
      cx = x;
      break;
    }
  }

  const auto kind = uniform_index(rng, 3);
  const double scale = n / 64.0;
  Mask& m = out.mask;
  double opacity = 1.0;
  if (kind == 0) {
    out.kind = "scratch";
    const double len = uniform(rng, 16, 30) * scale, ang = uniform(rng, 0, std::numbers::pi);
    const double half = uniform(rng, 0.9, 1.4) * scale;
    const double dy = std::sin(ang) * len / 2, dx = std::cos(ang) * len / 2;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double py = y + 0.5 - cy, px = x + 0.5 - cx;
        const double t = std::clamp((py * dy + px * dx) / (dy * dy + dx * dx), -1.0, 1.0);
        if (std::hypot(py - t * dy, px - t * dx) <= half) m.at(y, x) = 1;
      }
    }
  } else if (kind == 1) {
    out.kind = "blob";
    const double ry = uniform(rng, 3.5, 7) * scale, rx = uniform(rng, 3.5, 7) * scale;
    const double ang = uniform(rng, 0, std::numbers::pi);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double py = y + 0.5 - cy, px = x + 0.5 - cx;
        const double u = px * std::cos(ang) + py * std::sin(ang), v = -px * std::sin(ang) + py * std::cos(ang);
        if ((u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0) m.at(y, x) = 1;
      }
    }
  } else {
    out.kind = "stain";
    const PerlinField f = perlin(n, n, 8, derive_seed(seed, "stain"));
    const double radius = uniform(rng, 7, 11) * scale;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double d = std::hypot(y + 0.5 - cy, x + 0.5 - cx);
        if (d <= radius && f.at(y, x) > -0.35 + 0.6 * d / radius) m.at(y, x) = 1;
      }
    }
    if (m.count() < 12) {
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          if (std::hypot(y + 0.5 - cy, x + 0.5 - cx) <= 0.6 * radius) m.at(y, x) = 1;
        }
      }
    }
    opacity = uniform(rng, 0.75, 0.95);
  }
  m = compose_mask(m, fg);
  if (m.count() == 0) m.at(cy, cx) = 1;

  const auto color = contrast_color(normal, m, rng);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (!m.at(y, x)) continue;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - opacity) * normal.at(y, x, c) + opacity * color[c] + 0.02 * standard_normal(rng);
        out.image.at(y, x, c) = clamp01(v);
      }
    }
  }
  return out;
}

void write_fixture(const fs::path& root, const FixtureSpec& spec) {
  char name[32];
  for (const auto& category : spec.categories) {
    const auto cat_seed = derive_seed(spec.seed, category);
    const fs::path dir = root / category;
    std::error_code ec;
    fs::create_directories(dir / "train" / "good", ec);
    fs::create_directories(dir / "test" / "good", ec);
    if (ec || !fs::is_directory(dir / "test" / "good")) throw IoError("cannot create " + dir.string());

    const auto train_root = derive_seed(cat_seed, "train");
    for (int i = 0; i < spec.train_good; ++i) {
      std::snprintf(name, sizeof name, "%03d.png", i);
      save_png(fixture_normal(category, spec.size, derive_seed(train_root, i)), dir / "train" / "good" / name);
    }
    const auto good_root = derive_seed(cat_seed, "test.good");
    for (int i = 0; i < spec.test_good; ++i) {
      std::snprintf(name, sizeof name, "%03d.png", i);
      save_png(fixture_normal(category, spec.size, derive_seed(good_root, i)), dir / "test" / "good" / name);
    }
    const auto defect_root = derive_seed(cat_seed, "test.defect");
    for (int i = 0; i < spec.test_defect; ++i) {
      const auto s = derive_seed(defect_root, i);
      const Image normal = fixture_normal(category, spec.size, derive_seed(s, "normal"));
      const FixtureDefect d = fixture_defect(normal, derive_seed(s, "defect"));
      fs::create_directories(dir / "test" / d.kind);
      fs::create_directories(dir / "ground_truth" / d.kind);
      std::snprintf(name, sizeof name, "%03d", i);
      save_png(d.image, dir / "test" / d.kind / (std::string(name) + ".png"));
      save_mask(d.mask, dir / "ground_truth" / d.kind / (std::string(name) + "_mask.png"));
    }
  }
}

}  // namespace dfd
