#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "dfd/error.hpp"
#include "dfd/eval.hpp"
#include "test_util.hpp"

using namespace dfd;
using dfd::test::TempDir;

namespace {

double pairwise_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0;
  int pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        ++pairs;
      }
  return wins / pairs;
}

// 8-connected regions by breadth-first flood fill.
std::vector<std::vector<int>> regions_of(const Mask& m) {
  std::vector<int> seen(m.data.size(), 0);
  std::vector<std::vector<int>> out;
  for (int start = 0; start < static_cast<int>(m.data.size()); ++start) {
    if (!m.data[start] || seen[start]) continue;
    std::vector<int> region;
    std::deque<int> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
      const int p = queue.front();
      queue.pop_front();
      region.push_back(p);
      const int y = p / m.width, x = p % m.width;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= m.height || nx >= m.width) continue;
          const int q = ny * m.width + nx;
          if (m.data[q] && !seen[q]) {
            seen[q] = 1;
            queue.push_back(q);
          }
        }
    }
    out.push_back(region);
  }
  return out;
}

// Every distinct score as a threshold (predict >= v), plus the empty prediction.
double exhaustive_pro(const std::vector<Image>& maps, const std::vector<Mask>& gts, double limit) {
  std::set<float> values;
  for (const auto& m : maps) values.insert(m.data.begin(), m.data.end());
  std::vector<std::pair<double, double>> curve{{0.0, 0.0}};
  for (float v : values) {
    double fp = 0, normals = 0, overlap = 0;
    int n_regions = 0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
      for (std::size_t p = 0; p < maps[i].data.size(); ++p)
        if (!gts[i].data[p]) {
          normals += 1;
          fp += maps[i].data[p] >= v;
        }
      for (const auto& r : regions_of(gts[i])) {
        double hit = 0;
        for (int p : r) hit += maps[i].data[p] >= v;
        overlap += hit / r.size();
        ++n_regions;
      }
    }
    curve.emplace_back(fp / normals, overlap / n_regions);
  }
  std::sort(curve.begin(), curve.end());
  double area = 0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    auto [x0, y0] = curve[k - 1];
    auto [x1, y1] = curve[k];
    if (x0 >= limit) break;
    if (x1 > limit) {
      y1 = y0 + (limit - x0) / (x1 - x0) * (y1 - y0);
      x1 = limit;
    }
    area += (x1 - x0) * (y0 + y1) / 2;
  }
  return area / limit;
}

// Scores on the grid k / 199 so the 200 evenly spaced thresholds hit every value.
Image quantized_map(int h, int w, Rng& rng) {
  Image m(h, w, 1);
  for (auto& v : m.data) v = static_cast<float>(static_cast<double>(uniform_index(rng, 200)) / 199.0);
  m.data[0] = 0.0f;
  m.data[1] = 1.0f;
  return m;
}

Mask random_blobs(int h, int w, Rng& rng) {
  Mask m(h, w);
  const int blobs = 1 + static_cast<int>(uniform_index(rng, 3));
  for (int b = 0; b < blobs; ++b) {
    const int y = static_cast<int>(uniform_index(rng, h - 2)), x = static_cast<int>(uniform_index(rng, w - 2));
    const int bh = 1 + static_cast<int>(uniform_index(rng, 3)), bw = 1 + static_cast<int>(uniform_index(rng, 3));
    for (int yy = y; yy < std::min(h, y + bh); ++yy)
      for (int xx = x; xx < std::min(w, x + bw); ++xx) m.at(yy, xx) = 1;
  }
  return m;
}

Image mask_scores(const Mask& m) {
  Image s(m.height, m.width, 1);
  for (std::size_t i = 0; i < m.data.size(); ++i) s.data[i] = m.data[i];
  return s;
}

}  // namespace

TEST_CASE("auroc") {
  CHECK(auroc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
  CHECK(auroc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{1, 1, 0, 0}) == 0.0);
  CHECK(auroc(std::vector<double>(5, 0.3), std::vector<int>{0, 1, 0, 1, 1}) == 0.5);
  SUBCASE("all labelings of six scores match the pairwise oracle") {
    const std::vector<double> s{0.3, 0.7, 0.3, 0.1, 0.9, 0.7};
    int checked = 0;
    for (int bits = 0; bits < 64; ++bits) {
      std::vector<int> y(6);
      for (int i = 0; i < 6; ++i) y[i] = (bits >> i) & 1;
      const int pos = std::count(y.begin(), y.end(), 1);
      if (pos == 0 || pos == 6) {
        CHECK_THROWS_AS(auroc(s, y), MetricError);
        continue;
      }
      CHECK(auroc(s, y) == doctest::Approx(pairwise_auroc(s, y)).epsilon(1e-12));
      ++checked;
    }
    CHECK(checked == 62);
  }
  SUBCASE("invariant under strictly monotone transforms") {
    Rng rng = make_rng(4);
    std::vector<double> s(40);
    std::vector<int> y(40);
    for (int i = 0; i < 40; ++i) {
      s[i] = std::round(uniform(rng) * 10) / 10;
      y[i] = i % 3 == 0;
    }
    std::vector<double> t(s);
    for (auto& v : t) v = std::exp(3 * v) - 7;
    CHECK(auroc(t, y) == auroc(s, y));
  }
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1}, std::vector<int>{0, 1}), ArgumentError);
}

TEST_CASE("pixel_auroc") {
  Rng rng = make_rng(7);
  std::vector<Mask> gts{random_blobs(4, 4, rng), random_blobs(4, 4, rng)};
  std::vector<Image> perfect{mask_scores(gts[0]), mask_scores(gts[1])};
  CHECK(pixel_auroc(perfect, gts) == 1.0);
  std::vector<Image> inverted = perfect;
  for (auto& m : inverted)
    for (auto& v : m.data) v = 1 - v;
  CHECK(pixel_auroc(inverted, gts) == 0.0);

  std::vector<Image> maps{dfd::test::random_image(4, 4, 1, 1), dfd::test::random_image(4, 4, 1, 2)};
  std::vector<double> pooled;
  std::vector<int> labels;
  for (int i = 0; i < 2; ++i)
    for (int p = 0; p < 16; ++p) {
      pooled.push_back(maps[i].data[p]);
      labels.push_back(gts[i].data[p]);
    }
  CHECK(pixel_auroc(maps, gts) == doctest::Approx(pairwise_auroc(pooled, labels)).epsilon(1e-12));
  CHECK_THROWS_AS(pixel_auroc(maps, {gts[0]}), ArgumentError);
}

TEST_CASE("connected components use 8-connectivity") {
  Mask m(5, 5);
  m.at(0, 0) = m.at(1, 1) = m.at(2, 2) = 1;  // one diagonal region
  m.at(0, 4) = m.at(1, 4) = 1;                // second region
  m.at(4, 0) = 1;                             // third region
  std::vector<int> labels;
  CHECK(connected_components(m, labels) == 3);
  CHECK(labels[0] == labels[6]);
  CHECK(labels[6] == labels[12]);
  CHECK(labels[4] != labels[0]);
  CHECK(labels[1] == 0);
  Rng rng = make_rng(2);
  for (int k = 0; k < 20; ++k) {
    const Mask r = random_blobs(8, 8, rng);
    CHECK(connected_components(r, labels) == static_cast<int>(regions_of(r).size()));
  }
}

TEST_CASE("pro") {
  Rng rng = make_rng(11);
  SUBCASE("perfect and empty predictions") {
    const Mask gt = random_blobs(8, 8, rng);
    CHECK(pro({mask_scores(gt)}, {gt}) == doctest::Approx(1.0));
    CHECK(pro({Image(8, 8, 1)}, {gt}) == 0.0);
  }
  SUBCASE("single-region toy case against the exhaustive sweep") {
    Mask gt(8, 8);
    for (int y = 2; y < 5; ++y)
      for (int x = 3; x < 7; ++x) gt.at(y, x) = 1;
    const Image map = quantized_map(8, 8, rng);
    CHECK(pro({map}, {gt}) == doctest::Approx(exhaustive_pro({map}, {gt}, 0.3)).epsilon(1e-9));
  }
  SUBCASE("random 8x8 instances against the exhaustive sweep") {
    for (int k = 0; k < 10; ++k) {
      const std::vector<Mask> gts{random_blobs(8, 8, rng)};
      const std::vector<Image> maps{quantized_map(8, 8, rng)};
      CHECK(std::abs(pro(maps, gts) - exhaustive_pro(maps, gts, 0.3)) < 1e-6);
    }
  }
  SUBCASE("monotone in the FPR limit and bounded") {
    const std::vector<Mask> gts{random_blobs(8, 8, rng), random_blobs(8, 8, rng)};
    const std::vector<Image> maps{dfd::test::random_image(8, 8, 1, 3), dfd::test::random_image(8, 8, 1, 4)};
    double prev = 0.0;
    for (double limit : {0.05, 0.1, 0.2, 0.3, 0.5, 1.0}) {
      const double v = pro(maps, gts, {limit, 200});
      CHECK(v >= prev - 1e-12);
      CHECK((v >= 0.0 && v <= 1.0));
      prev = v;
    }
  }
  CHECK_THROWS_AS(pro({Image(8, 8, 1)}, {Mask(8, 8)}), MetricError);
  CHECK_THROWS_AS(pro({Image(8, 8, 1)}, {Mask(8, 8, 1)}), MetricError);
}

TEST_CASE("pro_area") {
  CHECK(pro_area({{0, 0}, {0.3, 1}}, 0.3) == doctest::Approx(0.5));
  CHECK(pro_area({{0, 0}, {0.6, 1}}, 0.3) == doctest::Approx(0.25));
  CHECK(pro_area({{0, 0}, {0.1, 1}}, 0.3) == doctest::Approx((0.05 + 0.2) / 0.3));
  CHECK_THROWS_AS(pro_area({{0, 0}}, 0.0), ArgumentError);
}

TEST_CASE("dataset layout ingestion") {
  TempDir dir;
  const auto root = dir / "bottle";
  auto img = [&](const std::filesystem::path& p) {
    std::filesystem::create_directories(p.parent_path());
    save_png(Image(8, 8, 3, 0.5f), p);
  };
  SUBCASE("two good and two defect images") {
    img(root / "train" / "good" / "000.png");
    img(root / "test" / "good" / "000.png");
    img(root / "test" / "good" / "001.png");
    img(root / "test" / "crack" / "000.png");
    img(root / "test" / "crack" / "001.png");
    std::filesystem::create_directories(root / "ground_truth" / "crack");
    save_mask(Mask(8, 8, 1), root / "ground_truth" / "crack" / "000_mask.png");
    save_mask(Mask(8, 8, 1), root / "ground_truth" / "crack" / "001.png");
    const auto layout = ingest_category(root);
    CHECK(layout.name == "bottle");
    CHECK(layout.train_good.size() == 1);
    REQUIRE(layout.test.size() == 4);
    int with_masks = 0, positives = 0;
    for (const auto& r : layout.test) {
      with_masks += r.mask.has_value();
      positives += r.label;
      CHECK(r.label == (r.defect == "good" ? 0 : 1));
    }
    CHECK(with_masks == 2);
    CHECK(positives == 2);
    CHECK(ingest_mvtec_layout(dir.path()).size() == 1);
    CHECK(ingest_mvtec_layout(root).size() == 1);
  }
  SUBCASE("missing ground truth is a layout error") {
    img(root / "train" / "good" / "000.png");
    img(root / "test" / "crack" / "000.png");
    CHECK_THROWS_AS(ingest_category(root), LayoutError);
  }
  SUBCASE("empty test directory is a layout error") {
    img(root / "train" / "good" / "000.png");
    std::filesystem::create_directories(root / "test");
    CHECK_THROWS_AS(ingest_category(root), LayoutError);
  }
}

TEST_CASE("fixture round-trips through ingestion") {
  TempDir dir;
  FixtureSpec spec;
  spec.categories = {"tile", "disc"};
  spec.train_good = 3;
  spec.test_good = 2;
  spec.test_defect = 4;
  spec.seed = 5;
  write_fixture(dir.path(), spec);
  const auto layouts = ingest_mvtec_layout(dir.path());
  REQUIRE(layouts.size() == 2);
  for (const auto& l : layouts) {
    CHECK(l.train_good.size() == 3);
    CHECK(l.test.size() == 6);
    for (const auto& r : l.test) {
      const Image im = load_image(r.image);
      CHECK(im.height == 64);
      if (r.label) {
        REQUIRE(r.mask.has_value());
        const Mask m = load_mask(*r.mask);
        CHECK(m.count() > 0);
        CHECK(m.width == 64);
      } else {
        CHECK_FALSE(r.mask.has_value());
      }
    }
  }
  // Generation is a pure function of the seed.
  CHECK(fixture_normal("tile", 64, 3).data == fixture_normal("tile", 64, 3).data);
  const auto d = fixture_defect(fixture_normal("tile", 64, 3), 8);
  for (std::size_t p = 0; p < d.mask.data.size(); ++p)
    if (!d.mask.data[p])
      for (int c = 0; c < 3; ++c) CHECK(d.image.data[p * 3 + c] == fixture_normal("tile", 64, 3).data[p * 3 + c]);
  FixtureSpec bad;
  bad.categories = {"marble"};
  CHECK_THROWS_AS(write_fixture(dir / "x", bad), ConfigError);
}

TEST_CASE("metric reports") {
  const std::vector<MetricRow> rows{{"tile", 2, 1, 1.0, 0.5, 0.25}, {"disc", 2, 1, 0.5, 0.5, 0.75}};
  const std::string csv = metrics_csv(rows);
  CHECK(csv.rfind("category,shots,seed,auroc_i,auroc_p,pro\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  const std::string text = metrics_report(rows);
  CHECK(text.find("tile.auroc_i = 1.000000") != std::string::npos);
  CHECK(text.find("mean.pro = 0.500000") != std::string::npos);

  Rng rng = make_rng(1);
  LabeledScores s;
  for (int i = 0; i < 4; ++i) {
    s.masks.push_back(i < 2 ? Mask(8, 8) : random_blobs(8, 8, rng));
    s.maps.push_back(mask_scores(s.masks.back()));
    s.labels.push_back(i >= 2);
    s.image_scores.push_back(i >= 2 ? 1.0 : 0.0);
  }
  const MetricRow r = evaluate(s, "toy", 2, 0);
  CHECK(r.auroc_i == 1.0);
  CHECK(r.auroc_p == 1.0);
  CHECK(r.pro == doctest::Approx(1.0));
}
