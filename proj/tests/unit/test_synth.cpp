#include <doctest.h>

#include <cmath>

#include "dfd/error.hpp"
#include "dfd/synth.hpp"
#include "test_util.hpp"

using namespace dfd;
using dfd::test::TempDir;

TEST_CASE("perlin field") {
  SUBCASE("vanishes at lattice corners") {
    for (int period : {1, 2, 4, 8, 16}) {
      const auto f = perlin(64, 64, period, 11);
      const int step = 64 / period;
      for (int y = 0; y < 64; y += step)
        for (int x = 0; x < 64; x += step) CHECK(f.at(y, x) == 0.0f);
    }
  }
  SUBCASE("deterministic and seed-sensitive") {
    CHECK(perlin(40, 56, 4, 3).data == perlin(40, 56, 4, 3).data);
    CHECK(perlin(40, 56, 4, 3).data != perlin(40, 56, 4, 4).data);
  }
  SUBCASE("values in [-1, 1] with near-zero mean") {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      for (int period : {4, 8, 16, 32}) {
        const auto f = perlin(256, 256, period, seed);
        for (float v : f.data) {
          CHECK_MESSAGE((v >= -1.0f && v <= 1.0f), "value out of range");
          sum += v;
          ++n;
        }
      }
    }
    CHECK(std::abs(sum / n) < 0.05);
  }
  SUBCASE("continuity between neighboring pixels") {
    // With `period` cells over `w` pixels the field moves at most
    // 8 * period / w per pixel (8 over the pixel period of a cell).
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      for (int period : {2, 4, 8, 16, 32}) {
        const auto f = perlin(128, 128, period, seed);
        double worst = 0.0;
        for (int y = 0; y < 128; ++y)
          for (int x = 0; x + 1 < 128; ++x) worst = std::max(worst, double(std::abs(f.at(y, x + 1) - f.at(y, x))));
        CHECK(worst < 8.0 * period / 128.0);
      }
    }
  }
  CHECK_THROWS_AS(perlin(8, 8, 0, 1), ArgumentError);
}

TEST_CASE("perlin_mask thresholds") {
  const auto f = perlin(48, 48, 4, 9);
  CHECK(perlin_mask(f, 1.0).count() == 0);
  CHECK(perlin_mask(f, -1.0 - 1e-9).count() == f.data.size());
  // Exact -1 never occurs in practice; every value exceeds it.
  CHECK(perlin_mask(f, -1.0).count() == f.data.size());
  const Mask m = perlin_mask(f, 0.5);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x) CHECK(m.at(y, x) == (f.at(y, x) > 0.5 ? 1 : 0));
}

TEST_CASE("compose_mask is an elementwise AND") {
  Rng rng = make_rng(5);
  Mask a(16, 16), b(16, 16);
  for (auto& v : a.data) v = uniform_index(rng, 2);
  for (auto& v : b.data) v = uniform_index(rng, 2);
  const Mask m = compose_mask(a, b);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    CHECK(m.data[i] == std::min(a.data[i], b.data[i]));
    CHECK(m.data[i] <= a.data[i]);
    CHECK(m.data[i] <= b.data[i]);
  }
  CHECK(compose_mask(a, Mask(16, 16, 1)).data == a.data);
  CHECK(compose_mask(Mask(16, 16), b).count() == 0);
  CHECK_THROWS_AS(compose_mask(a, Mask(8, 16)), ArgumentError);
}

TEST_CASE("blend_anomaly follows the blending equation") {
  const Image img = dfd::test::random_image(12, 12, 3, 1);
  const Image tex = dfd::test::random_image(12, 12, 3, 2);
  SUBCASE("empty mask leaves the image unchanged") {
    const auto s = blend_anomaly(img, tex, Mask(12, 12), 0.7);
    CHECK(s.image.data == img.data);
    CHECK_FALSE(s.is_anomalous);
  }
  SUBCASE("full mask with beta 1 yields the texture") {
    const auto s = blend_anomaly(img, tex, Mask(12, 12, 1), 1.0);
    CHECK(s.image.data == tex.data);
    CHECK(s.is_anomalous);
  }
  SUBCASE("hand value") {
    Image a(8, 8, 3, 0.2f), t(8, 8, 3, 0.6f);
    const auto s = blend_anomaly(a, t, Mask(8, 8, 1), 0.5);
    for (float v : s.image.data) CHECK(v == doctest::Approx(0.4).epsilon(1e-6));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(blend_anomaly(img, Image(8, 8, 3), Mask(12, 12), 0.5), ArgumentError);
    CHECK_THROWS_AS(blend_anomaly(img, tex, Mask(8, 8), 0.5), ArgumentError);
    CHECK_THROWS_AS(blend_anomaly(img, tex, Mask(12, 12), 1.5), ArgumentError);
  }
}

TEST_CASE("texture sources") {
  CHECK(procedural_texture(32, 32, 7).data == procedural_texture(32, 32, 7).data);
  CHECK(texture_source("procedural", 7, 32, 32).data == procedural_texture(32, 32, 7).data);
  for (float v : procedural_texture(32, 32, 8).data) CHECK((v >= 0.0f && v <= 1.0f));

  TempDir dir;
  CHECK_THROWS_AS(texture_source("folder", 1, 16, 16, dir.path()), ConfigError);
  CHECK_THROWS_AS(texture_source("bogus", 1, 16, 16, dir.path()), ConfigError);

  save_png(Image(16, 16, 3, 0.25f), dir / "a.png");
  const Image stored = load_image(dir / "a.png");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CHECK(texture_source("folder", seed, 16, 16, dir.path()).data == stored.data);
  }

  SUBCASE("selection is uniform over k files") {
    const std::size_t k = 5, trials = 5000;
    std::vector<int> counts(k, 0);
    for (std::uint64_t seed = 0; seed < trials; ++seed) counts[texture_pick(seed, k)]++;
    const double p = 1.0 / k, mean = trials * p, sigma = std::sqrt(trials * p * (1 - p));
    for (int c : counts) CHECK(std::abs(c - mean) < 3 * sigma);
  }
}

TEST_CASE("augment policy") {
  const Image img = procedural_texture(32, 32, 3);
  AugmentPolicy policy;
  SUBCASE("count is respected exactly") {
    policy.count = 80;
    CHECK(augment(img, policy, 1).size() == 80);
    policy.count = 13;
    CHECK(augment(img, policy, 1).size() == 13);
    policy.count = 0;
    CHECK_THROWS_AS(augment(img, policy, 1), ArgumentError);
  }
  SUBCASE("probability 0 yields only normal samples") {
    policy.count = 40;
    policy.anomaly_prob = 0.0;
    for (const auto& s : augment(img, policy, 2)) {
      CHECK_FALSE(s.is_anomalous);
      CHECK(s.mask.count() == 0);
    }
  }
  SUBCASE("reproducible element by element and order independent") {
    policy.count = 12;
    const auto a = augment(img, policy, 3);
    const auto b = augment(img, policy, 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].image.data == b[i].image.data);
      CHECK(a[i].mask.data == b[i].mask.data);
      CHECK(augment_one(img, policy, 3, i).image.data == a[i].image.data);
    }
  }
  SUBCASE("samples respect their invariants") {
    policy.count = 30;
    Image object(32, 32, 3, 0.05f);
    for (int y = 8; y < 24; ++y)
      for (int x = 8; x < 24; ++x)
        for (int c = 0; c < 3; ++c) object.at(y, x, c) = 0.8f;
    for (const auto& s : augment(object, policy, 4)) {
      CHECK(s.is_anomalous == (s.mask.count() > 0));
      const Mask fg = foreground_mask(s.normal);
      for (std::size_t p = 0; p < s.mask.data.size(); ++p) {
        CHECK(s.mask.data[p] <= fg.data[p]);
        if (!s.mask.data[p]) {
          for (int c = 0; c < 3; ++c) CHECK(s.image.data[p * 3 + c] == s.normal.data[p * 3 + c]);
        }
      }
      if (s.is_anomalous) CHECK((s.beta >= 0.15 && s.beta <= 1.0));
    }
  }
  SUBCASE("anomalous fraction matches the probability") {
    policy.count = 10000;
    policy.rotate = false;
    std::size_t anomalous = 0;
    for (const auto& s : augment(img, policy, 5)) anomalous += s.is_anomalous;
    CHECK(std::abs(anomalous / 10000.0 - 0.7) < 0.02);
  }
}

TEST_CASE("feature-level perturbation") {
  FeatureMap q(8, 8, 192);
  Rng rng = make_rng(1);
  for (auto& v : q.data) v = static_cast<float>(uniform(rng, -1, 1));
  SUBCASE("tiny std leaves features unchanged") {
    const auto out = perturb_features(q, {0.0, 1e-12, 3});
    for (std::size_t i = 0; i < q.data.size(); ++i) CHECK(std::abs(out.data[i] - q.data[i]) < 1e-9);
  }
  SUBCASE("noise mean is consistent with zero") {
    const auto out = perturb_features(q, {0.0, 0.015, 4});
    double sum = 0.0;
    for (std::size_t i = 0; i < q.data.size(); ++i) sum += double(out.data[i]) - q.data[i];
    const double n = static_cast<double>(q.data.size());
    CHECK(std::abs(sum / n) < 3 * 0.015 / std::sqrt(n));
  }
  SUBCASE("same seed, same output") {
    CHECK(perturb_features(q, {0.0, 0.015, 9}).data == perturb_features(q, {0.0, 0.015, 9}).data);
    CHECK(perturb_features(q, {0.0, 0.015, 9}).data != perturb_features(q, {0.0, 0.015, 10}).data);
  }
  CHECK_THROWS_AS(gaussian_noise(4, {0.0, 0.0, 1}), ArgumentError);
}

TEST_CASE("export_samples writes one manifest line per sample") {
  TempDir dir;
  AugmentPolicy policy;
  policy.count = 7;
  const auto samples = augment(procedural_texture(32, 32, 1), policy, 6);
  export_samples(samples, dir.path());
  const std::string manifest = dfd::test::read_bytes(dir / "manifest.txt");
  CHECK(std::count(manifest.begin(), manifest.end(), '\n') == 7);
}
