#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "dfd/error.hpp"
#include "dfd/frequency.hpp"
#include "test_util.hpp"

using namespace dfd;

namespace {

int mirror(int i, int n) {
  // Reflection without repeating the edge sample: -1 -> 1, n -> n - 2.
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

// Direct 2D convolution with the full 5x5 outer-product kernel.
std::vector<double> conv5x5(const std::vector<double>& src, int h, int w, double gain) {
  const double k1[5] = {1, 4, 6, 4, 1};
  std::vector<double> out(src.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx)
          acc += k1[dy + 2] * k1[dx + 2] / 256.0 * src[mirror(y + dy, h) * w + mirror(x + dx, w)];
      out[y * w + x] = gain * acc;
    }
  return out;
}

std::vector<double> as_double(const Image& img) { return {img.data.begin(), img.data.end()}; }

double energy(const Image& img) {
  double e = 0.0;
  for (float v : img.data) e += double(v) * v;
  return e;
}

}  // namespace

TEST_CASE("pyr_down") {
  SUBCASE("constant and zero images") {
    const Image c = pyr_down(Image(10, 14, 3, 0.42f));
    CHECK(c.height == 5);
    CHECK(c.width == 7);
    for (float v : c.data) CHECK(v == doctest::Approx(0.42).epsilon(1e-6));
    for (float v : pyr_down(Image(8, 8, 1)).data) CHECK(v == 0.0f);
  }
  SUBCASE("impulse against direct convolution and odd-index subsampling") {
    for (auto [h, w] : {std::pair{4, 4}, std::pair{7, 9}}) {
      Image img(h, w, 1);
      img.at(1, 1) = 1.0f;
      const auto blurred = conv5x5(as_double(img), h, w, 1.0);
      const Image out = pyr_down(img);
      CHECK(out.height == h / 2);
      CHECK(out.width == w / 2);
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) CHECK(out.at(y, x) == doctest::Approx(blurred[(2 * y + 1) * w + 2 * x + 1]).epsilon(1e-7));
    }
  }
  SUBCASE("random image against the oracle") {
    const Image img = dfd::test::random_image(12, 10, 1, 7);
    const auto blurred = conv5x5(as_double(img), 12, 10, 1.0);
    const Image out = pyr_down(img);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 5; ++x) CHECK(std::abs(out.at(y, x) - blurred[(2 * y + 1) * 10 + 2 * x + 1]) < 1e-6);
  }
  CHECK_THROWS_AS(pyr_down(Image(1, 8, 3)), ArgumentError);
}

TEST_CASE("pyr_up") {
  SUBCASE("constant image keeps its level") {
    const Image out = pyr_up(Image(6, 5, 3, 0.3f), 12, 10);
    for (float v : out.data) CHECK(v == doctest::Approx(0.3).epsilon(1e-6));
  }
  SUBCASE("zero stays zero") {
    for (float v : pyr_up(Image(4, 4, 1), 8, 8).data) CHECK(v == 0.0f);
  }
  SUBCASE("impulse against zero-stuffing plus direct convolution") {
    Image img(4, 5, 1);
    img.at(2, 3) = 1.0f;
    for (auto [th, tw] : {std::pair{8, 10}, std::pair{9, 11}}) {
      std::vector<double> stuffed(th * tw, 0.0);
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x)
          if (2 * y + 1 < th && 2 * x + 1 < tw) stuffed[(2 * y + 1) * tw + 2 * x + 1] = img.at(y, x);
      const auto expected = conv5x5(stuffed, th, tw, 4.0);
      const Image out = pyr_up(img, th, tw);
      for (int i = 0; i < th * tw; ++i) CHECK(out.data[i] == doctest::Approx(expected[i]).epsilon(1e-7));
    }
  }
  CHECK_THROWS_AS(pyr_up(Image(4, 4, 1), 12, 8), ArgumentError);
}

TEST_CASE("pyramid operators are linear") {
  const Image a = dfd::test::random_image(16, 12, 3, 1);
  const Image b = dfd::test::random_image(16, 12, 3, 2);
  Image mix = a;
  for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = 0.7f * a.data[i] - 1.3f * b.data[i];
  const Image da = pyr_down(a), db = pyr_down(b), dm = pyr_down(mix);
  for (std::size_t i = 0; i < dm.data.size(); ++i) CHECK(std::abs(dm.data[i] - (0.7f * da.data[i] - 1.3f * db.data[i])) < 1e-6);
  const Image ua = pyr_up(da, 16, 12), ub = pyr_up(db, 16, 12), um = pyr_up(dm, 16, 12);
  for (std::size_t i = 0; i < um.data.size(); ++i) CHECK(std::abs(um.data[i] - (0.7f * ua.data[i] - 1.3f * ub.data[i])) < 1e-6);
}

TEST_CASE("split_frequency") {
  SUBCASE("reconstruction is exact") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Image img = standardize(dfd::test::random_image(32, 48, 3, seed));
      const auto pair = split_frequency(img);
      for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(std::abs(pair.low.data[i] + pair.high.data[i] - img.data[i]) < 1e-6);
    }
  }
  SUBCASE("constant image is all low band") {
    const auto pair = split_frequency(Image(16, 16, 3, 0.6f));
    for (std::size_t i = 0; i < pair.low.data.size(); ++i) {
      CHECK(pair.low.data[i] == doctest::Approx(0.6).epsilon(1e-6));
      CHECK(std::abs(pair.high.data[i]) < 1e-6);
    }
  }
  SUBCASE("Nyquist checkerboard is almost entirely high band") {
    Image board(32, 32, 1);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) board.at(y, x) = ((x + y) % 2) ? 1.0f : -1.0f;
    const auto pair = split_frequency(board);
    CHECK(energy(pair.low) < 0.05 * energy(board));
  }
  CHECK_THROWS_AS(split_frequency(Image(15, 16, 3)), ArgumentError);
}

TEST_CASE("dft2") {
  SUBCASE("constant image has only a DC bin") {
    const auto s = dft2(Image(6, 10, 1, 0.5f));
    CHECK(s.real[0] == doctest::Approx(0.5 * 60));
    for (std::size_t i = 1; i < s.real.size(); ++i) {
      CHECK(std::abs(s.real[i]) < 1e-9);
      CHECK(std::abs(s.imag[i]) < 1e-9);
    }
  }
  SUBCASE("row cosine gives conjugate spikes") {
    const int w = 16, k = 3;
    Image img(8, w, 1);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < w; ++x) img.at(y, x) = static_cast<float>(std::cos(2 * std::numbers::pi * k * x / w));
    const auto s = dft2(img);
    for (int u = 0; u < 8; ++u)
      for (int v = 0; v < w; ++v) {
        const double mag = std::abs(s.at(u, v));
        if (u == 0 && (v == k || v == w - k)) {
          CHECK(mag == doctest::Approx(8 * w / 2.0).epsilon(1e-6));
        } else {
          CHECK(mag < 1e-4);
        }
      }
  }
  SUBCASE("matches the direct double sum and satisfies Parseval") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Image img = dfd::test::random_image(8, 8, 1, 100 + seed);
      const auto s = dft2(img);
      double spatial = 0.0, spectral = 0.0;
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
          std::complex<double> f = 0.0;
          for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
              f += double(img.at(y, x)) * std::polar(1.0, -2 * std::numbers::pi * (double(u * y) / 8 + double(v * x) / 8));
          CHECK(std::abs(f - s.at(u, v)) < 1e-9);
          spectral += std::norm(s.at(u, v));
        }
      for (float v : img.data) spatial += double(v) * v;
      CHECK(std::abs(spatial - spectral / 64.0) <= 1e-6 * spatial);
    }
  }
  SUBCASE("color input is analyzed on luminance") {
    const Image img = dfd::test::random_image(8, 8, 3, 3);
    const auto a = dft2(img), b = dft2(to_grayscale(img));
    CHECK(a.real == b.real);
  }
}

TEST_CASE("amplitude_phase") {
  Spectrum s{2, 2, {3.0, -2.0, 0.0, 5.0}, {4.0, 0.0, 0.0, 0.0}};
  const auto ap = amplitude_phase(s);
  CHECK(ap.amplitude[0] == doctest::Approx(5.0));
  CHECK(ap.phase[0] == doctest::Approx(std::atan2(4.0, 3.0)));
  CHECK(ap.phase[1] == doctest::Approx(std::numbers::pi));
  CHECK(ap.phase[2] == 0.0);
  CHECK(ap.phase[3] == 0.0);
  const auto rand = amplitude_phase(dft2(dfd::test::random_image(8, 8, 1, 4)));
  for (std::size_t i = 0; i < rand.amplitude.size(); ++i) {
    CHECK(rand.amplitude[i] >= 0.0);
    CHECK((rand.phase[i] > -std::numbers::pi && rand.phase[i] <= std::numbers::pi));
  }
}

TEST_CASE("radial_energy") {
  SUBCASE("constant image concentrates at radius 0") {
    const auto p = radial_energy_of(Image(16, 16, 3, 0.7f));
    CHECK(p.radius.size() == 9);
    CHECK(p.energy[0] == doctest::Approx(0.7 * 256));
    for (std::size_t r = 1; r < p.energy.size(); ++r) CHECK(p.energy[r] < 1e-9);
  }
  SUBCASE("cosine of frequency k peaks at bin k") {
    for (int k : {2, 5, 7}) {
      Image img(16, 16, 1);
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) img.at(y, x) = static_cast<float>(std::cos(2 * std::numbers::pi * k * x / 16));
      const auto p = radial_energy_of(img);
      CHECK(std::max_element(p.energy.begin(), p.energy.end()) - p.energy.begin() == k);
    }
  }
  SUBCASE("bins conserve the total amplitude") {
    for (auto [h, w] : {std::pair{16, 16}, std::pair{12, 20}}) {
      const Image img = dfd::test::random_image(h, w, 1, 5);
      const auto s = dft2(img);
      double total = 0.0;
      for (std::size_t i = 0; i < s.real.size(); ++i) total += std::hypot(s.real[i], s.imag[i]);
      const auto p = radial_energy(fftshift(s));
      CHECK(p.radius.size() == static_cast<std::size_t>(std::min(h, w) / 2 + 1));
      double binned = 0.0;
      for (double e : p.energy) {
        CHECK(e >= 0.0);
        binned += e;
      }
      CHECK(std::abs(binned - total) < 1e-6 * total);
    }
  }
}

TEST_CASE("gray_histogram") {
  const auto white = gray_histogram(Image(8, 6, 3, 1.0f));
  CHECK(white[255] == 48);
  Image half(8, 8, 3, 0.0f);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) half.at(y, x, c) = 1.0f;
  const auto h = gray_histogram(half);
  CHECK(h[0] == 32);
  CHECK(h[255] == 32);
  const auto r = gray_histogram(dfd::test::random_image(13, 7, 3, 6));
  CHECK(std::accumulate(r.begin(), r.end(), std::uint64_t{0}) == 91);
}

TEST_CASE("analyze_set averages profiles and histograms") {
  const std::vector<Image> set{dfd::test::random_image(16, 16, 3, 1), dfd::test::random_image(16, 16, 3, 2)};
  const auto a = analyze_set(set);
  const auto p0 = radial_energy_of(set[0]), p1 = radial_energy_of(set[1]);
  for (std::size_t r = 0; r < p0.energy.size(); ++r) CHECK(a.mean_profile.energy[r] == doctest::Approx((p0.energy[r] + p1.energy[r]) / 2));
  CHECK(std::accumulate(a.mean_histogram.begin(), a.mean_histogram.end(), 0.0) == doctest::Approx(1.0));
  CHECK(a.high_band == doctest::Approx(high_band_energy(a.mean_profile)));
  CHECK(histogram_l1(a.mean_histogram, a.mean_histogram) == 0.0);
  CHECK_THROWS_AS(analyze_set({}), ArgumentError);
  CHECK_THROWS_AS(analyze_set({Image(8, 8, 3), Image(8, 10, 3)}), ArgumentError);
}
