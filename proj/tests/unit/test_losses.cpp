#include <doctest.h>

#include <cmath>

#include "dfd/error.hpp"
#include "dfd/grad_suite.hpp"
#include "dfd/losses.hpp"
#include "test_util.hpp"

using namespace dfd;
using TD = ad::Tensor<double>;

namespace {

TD filled(ad::Shape shape, double v) { return TD::constant(shape, std::vector<double>(ad::numel(shape), v)); }

TD from(ad::Shape shape, std::vector<double> v) { return TD::constant(std::move(shape), std::move(v)); }

double gau(const TD& sn, const TD& sa, double theta = 0.8, LossKind kind = LossKind::kHinge) {
  const std::vector<TD> n{sn}, a{sa};
  return gaussian_loss<double>(n, a, theta, kind).item();
}

double pix(const TD& s, const TD& m, bool literal = false, LossKind kind = LossKind::kHinge) {
  const std::vector<TD> a{s};
  return pixel_loss<double>(a, m, 0.8, literal, kind).item();
}

}  // namespace

TEST_CASE("pool_mask") {
  CHECK(pool_mask(Mask(64, 64), 8, 8).count() == 0);
  Mask one(64, 64);
  one.at(37, 5) = 1;
  const Mask p = pool_mask(one, 8, 8);
  CHECK(p.count() == 1);
  CHECK(p.at(4, 0) == 1);

  Rng rng = make_rng(3);
  Mask m(24, 36);
  for (auto& v : m.data) v = uniform(rng) < 0.02 ? 1 : 0;
  const Mask pooled = pool_mask(m, 4, 6);
  for (int gy = 0; gy < 4; ++gy)
    for (int gx = 0; gx < 6; ++gx) {
      int any = 0;
      for (int y = gy * 6; y < gy * 6 + 6; ++y)
        for (int x = gx * 6; x < gx * 6 + 6; ++x) any |= m.at(y, x);
      CHECK(pooled.at(gy, gx) == any);
    }
  CHECK_THROWS_AS(pool_mask(m, 5, 6), ArgumentError);
}

TEST_CASE("similarity_loss") {
  const auto q = dfd::test::random_values(2 * 4 * 3, 1);
  const TD qa = from({2, 4, 3}, q);
  const TD mask = from({2, 4}, {1, 0, 1, 1, 0, 1, 0, 0});
  SUBCASE("identical features give zero per band") {
    const std::vector<TD> a{qa, qa}, n{qa, qa};
    CHECK(similarity_loss<double>(a, n, mask).item() == doctest::Approx(0.0).scale(1));
  }
  SUBCASE("anti-parallel features give 2 per band") {
    const std::vector<TD> a{qa}, n{scale(qa, -3.0)};
    CHECK(similarity_loss<double>(a, n, filled({2, 4}, 1.0)).item() == doctest::Approx(2.0));
    const std::vector<TD> a2{qa, qa}, n2{scale(qa, -3.0), scale(qa, -1.0)};
    CHECK(similarity_loss<double>(a2, n2, filled({2, 4}, 1.0)).item() == doctest::Approx(4.0));
    CHECK(similarity_loss<double>(a, n, filled({2, 4}, 1.0), -1.0).item() == doctest::Approx(0.0).scale(1));
  }
  SUBCASE("matches a direct dot-product oracle") {
    const auto r = dfd::test::random_values(24, 2);
    const std::vector<TD> a{qa}, n{from({2, 4, 3}, r)};
    double expected = 0.0;
    for (int b = 0; b < 2; ++b) {
      double dot = 0, na = 0, nn = 0;
      for (int p = 0; p < 4; ++p) {
        const double m = mask.data()[b * 4 + p];
        for (int c = 0; c < 3; ++c) {
          const double x = m * q[(b * 4 + p) * 3 + c], y = m * r[(b * 4 + p) * 3 + c];
          dot += x * y;
          na += x * x;
          nn += y * y;
        }
      }
      expected += 1 - dot / std::sqrt(na * nn);
    }
    CHECK(similarity_loss<double>(a, n, mask).item() == doctest::Approx(expected / 2));
  }
  SUBCASE("empty masks contribute nothing") {
    const std::vector<TD> a{qa}, n{scale(qa, -1.0)};
    CHECK(similarity_loss<double>(a, n, filled({2, 4}, 0.0)).item() == 0.0);
  }
  const std::vector<TD> one{qa}, two{qa, qa};
  CHECK_THROWS_AS(similarity_loss<double>(one, two, mask), ArgumentError);
}

TEST_CASE("gaussian_loss") {
  CHECK(gau(filled({2, 4}, 0.8), filled({2, 4}, -0.8)) == 0.0);
  CHECK(gau(filled({2, 4}, 2.0), filled({2, 4}, -0.8)) == 0.0);
  CHECK(gau(filled({2, 4}, 2.0), filled({2, 4}, 0.0)) == doctest::Approx(0.8));
  const std::vector<TD> zeros{filled({1, 4}, 0.0), filled({1, 4}, 0.0)};
  CHECK(gaussian_loss<double>(zeros, zeros, 0.8).item() == doctest::Approx(3.2));
  SUBCASE("hand value with mixed scores") {
    // normal: max(0, .8 - s) over {1, .5, -1, .8} -> {0, .3, 1.8, 0}; mean .525
    // noised: max(0, .8 + s) over {-1, 0, .2, -.5} -> {0, .8, 1, .3}; mean .525
    CHECK(gau(from({1, 4}, {1, 0.5, -1, 0.8}), from({1, 4}, {-1, 0, 0.2, -0.5})) == doctest::Approx(1.05));
  }
  SUBCASE("monotone in the scores") {
    const auto base = dfd::test::random_values(8, 3);
    std::vector<double> up = base, down = base;
    for (std::size_t i = 0; i < 8; ++i) {
      up[i] += 0.1 * (i + 1);
      down[i] -= 0.1 * (i + 1);
    }
    const TD s = from({2, 4}, base);
    CHECK(gau(from({2, 4}, up), s) <= gau(s, s));
    CHECK(gau(s, from({2, 4}, down)) <= gau(s, s));
  }
}

TEST_CASE("pixel_loss") {
  const TD mask = from({1, 4}, {0, 1, 0, 1});
  CHECK(pix(from({1, 4}, {0.8, -0.8, 0.8, -0.8}), mask) == 0.0);
  SUBCASE("2x2 hand evaluation") {
    // normal cells {0.2, 1.0} -> {0.6, 0}, mean 0.3; anomalous cells {0.1, -2} -> {0.9, 0}, mean 0.45
    CHECK(pix(from({1, 4}, {0.2, 0.1, 1.0, -2.0}), mask) == doctest::Approx(0.75));
    // literal: normal term over all cells of max(0, .8 - s(1-M)) = {.6, .8, 0, .8}; mean .55
    //          anomalous term over all cells of max(0, .8 + sM) = {.8, .9, .8, 0}; mean .625
    CHECK(pix(from({1, 4}, {0.2, 0.1, 1.0, -2.0}), mask, true) == doctest::Approx(1.175));
  }
  SUBCASE("empty mask keeps only the normal term") {
    CHECK(pix(from({1, 4}, {0.0, 0.8, 2.0, -0.2}), filled({1, 4}, 0.0)) == doctest::Approx((0.8 + 0 + 0 + 1.0) / 4));
  }
  SUBCASE("two bands add") {
    const std::vector<TD> bands{filled({1, 4}, 0.0), filled({1, 4}, 0.0)};
    CHECK(pixel_loss<double>(bands, mask, 0.8).item() == doctest::Approx(3.2));
  }
  SUBCASE("monotone in the scores") {
    const auto base = dfd::test::random_values(4, 4);
    std::vector<double> better = base;
    for (int i = 0; i < 4; ++i) better[i] += mask.data()[i] > 0 ? -0.3 : 0.3;
    CHECK(pix(from({1, 4}, better), mask) <= pix(from({1, 4}, base), mask));
  }
  CHECK_THROWS_AS(pix(filled({1, 3}, 0.0), mask), ArgumentError);
}

TEST_CASE("cls_loss") {
  auto cls = [](const std::vector<TD>& s, std::vector<double> tau) {
    return cls_loss<double>(s, from({tau.size()}, tau)).item();
  };
  CHECK(cls({from({1, 3}, {5, -20, 3})}, {1}) < 1e-15);
  CHECK(cls({filled({1, 3}, 20)}, {0}) < 1e-15);
  CHECK(cls({filled({1, 3}, 0)}, {1}) == doctest::Approx(0.25));
  CHECK(cls({filled({1, 3}, 0), filled({1, 3}, 0)}, {1}) == doctest::Approx(0.5));
  // Batch mean over samples: (1 - 0.5)^2 and (0 - 0.5)^2.
  CHECK(cls({filled({2, 3}, 0)}, {1, 0}) == doctest::Approx(0.25));
  CHECK_THROWS_AS(cls({filled({2, 3}, 0)}, {1}), ArgumentError);
}

TEST_CASE("total_loss") {
  const auto t = total_loss<double>(TD::scalar(1.0), TD::scalar(0.4), TD::scalar(0.2), TD::scalar(3.0), 2.0, 0.02);
  CHECK(t.values.per == doctest::Approx(0.3));
  CHECK(t.values.total == doctest::Approx(1.0 + 2 * 0.3 + 0.02 * 3.0));
  CHECK(t.total.item() == doctest::Approx(t.values.total));
  const auto v = total_loss<double>(TD::scalar(1.0), TD::scalar(0.4), TD::scalar(0.2), TD::scalar(3.0), 1.0, 1.0);
  CHECK(v.values.total == doctest::Approx(1.0 + 0.3 + 3.0));
  const auto z = total_loss<double>({}, {}, {}, {}, 2.0, 0.02);
  CHECK(z.values.total == 0.0);
}

TEST_CASE("alternative penalties") {
  const TD pos = filled({1, 2}, 0.8), neg = filled({1, 2}, -0.8);
  CHECK(gau(pos, neg, 0.8, LossKind::kMse) == 0.0);
  CHECK(gau(filled({1, 2}, 0.0), filled({1, 2}, 100.0), 0.8, LossKind::kHinge) == doctest::Approx(100.8 + 0.8));
  CHECK(pix(filled({1, 2}, 0.0), filled({1, 2}, 0.0), false, LossKind::kCrossEntropy) == doctest::Approx(std::log(2.0)));
  CHECK(pix(filled({1, 2}, 60.0), filled({1, 2}, 0.0), false, LossKind::kFocal) < 1e-30);
  CHECK(pix(filled({1, 2}, -60.0), filled({1, 2}, 1.0), false, LossKind::kFocal) < 1e-30);
  for (auto kind : {LossKind::kHinge, LossKind::kCrossEntropy, LossKind::kFocal, LossKind::kMse}) {
    CHECK(parse_loss_kind(to_string(kind)) == kind);
    const auto s = from({2, 4}, dfd::test::random_values(8, 9));
    CHECK(gau(s, s, 0.8, kind) >= 0.0);
  }
  CHECK(parse_loss_kind("cross-entropy") == LossKind::kCrossEntropy);
  CHECK_THROWS_AS(parse_loss_kind("l2"), ConfigError);
}

TEST_CASE("every loss passes a gradient check through the discriminators") {
  for (const auto& e : run_grad_suite(GradSuiteOptions{})) {
    CAPTURE(e.name);
    CAPTURE(e.report.worst);
    CHECK(e.report.passed);
    CHECK(e.report.max_rel_error < 1e-3);
  }
}
