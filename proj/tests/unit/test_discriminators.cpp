#include <doctest.h>

#include <cmath>

#include "dfd/discriminators.hpp"
#include "dfd/error.hpp"
#include "test_util.hpp"

using namespace dfd;
using TD = ad::Tensor<double>;
using Mat = std::vector<std::vector<double>>;

namespace {

std::vector<double> values(const ad::Parameter<double>& p) { return {p.value.data().begin(), p.value.data().end()}; }

// rows x in -> rows x out with w [out, in].
Mat dense(const Mat& x, const ad::Parameter<double>& w, const ad::Parameter<double>& b) {
  const auto wv = values(w), bv = values(b);
  const std::size_t out = w.value.dim(0), in = w.value.dim(1);
  Mat y(x.size(), std::vector<double>(out));
  for (std::size_t r = 0; r < x.size(); ++r)
    for (std::size_t o = 0; o < out; ++o) {
      double acc = bv[o];
      for (std::size_t i = 0; i < in; ++i) acc += wv[o * in + i] * x[r][i];
      y[r][o] = acc;
    }
  return y;
}

Mat norm(const Mat& x, const ad::Parameter<double>& g, const ad::Parameter<double>& b) {
  const auto gv = values(g), bv = values(b);
  Mat y = x;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double n = static_cast<double>(x[r].size());
    double mu = 0, var = 0;
    for (double v : x[r]) mu += v / n;
    for (double v : x[r]) var += (v - mu) * (v - mu) / n;
    for (std::size_t i = 0; i < x[r].size(); ++i) y[r][i] = (x[r][i] - mu) / std::sqrt(var + 1e-5) * gv[i] + bv[i];
  }
  return y;
}

double gelu(double x) { return 0.5 * x * (1 + std::tanh(std::sqrt(2 / M_PI) * (x + 0.044715 * x * x * x))); }

// One sample's scores from first principles.
std::vector<double> perlin_reference(const PerlinDiscriminator<double>& net, const Mat& q) {
  const std::size_t p = q.size(), d = net.shape.width, heads = net.shape.heads, dh = d / heads;
  const auto pos = values(net.pos);
  Mat x = dense(q, net.proj_w, net.proj_b);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t i = 0; i < d; ++i) x[r][i] += pos[r * d + i];
  const Mat qkv = dense(norm(x, net.ln1_g, net.ln1_b), net.qkv_w, net.qkv_b);
  Mat mixed(p, std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < p; ++i) {
      std::vector<double> logits(p);
      double top = -1e300;
      for (std::size_t j = 0; j < p; ++j) {
        double dot = 0;
        for (std::size_t k = 0; k < dh; ++k) dot += qkv[i][h * dh + k] * qkv[j][d + h * dh + k];
        logits[j] = dot / std::sqrt(double(dh));
        top = std::max(top, logits[j]);
      }
      double z = 0;
      for (auto& l : logits) z += (l = std::exp(l - top));
      for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = 0; k < dh; ++k) mixed[i][h * dh + k] += logits[j] / z * qkv[j][2 * d + h * dh + k];
    }
  const Mat attn = dense(mixed, net.attn_w, net.attn_b);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t i = 0; i < d; ++i) x[r][i] += attn[r][i];
  Mat hidden = dense(norm(x, net.ln2_g, net.ln2_b), net.fc1_w, net.fc1_b);
  for (auto& row : hidden)
    for (auto& v : row) v = gelu(v);
  const Mat mlp = dense(hidden, net.fc2_w, net.fc2_b);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t i = 0; i < d; ++i) x[r][i] += mlp[r][i];
  const Mat s = dense(norm(x, net.lnf_g, net.lnf_b), net.head_w, net.head_b);
  std::vector<double> out(p);
  for (std::size_t r = 0; r < p; ++r) out[r] = s[r][0];
  return out;
}

Mat rows_of(const std::vector<double>& flat, std::size_t offset, std::size_t p, std::size_t c) {
  Mat m(p, std::vector<double>(c));
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t i = 0; i < c; ++i) m[r][i] = flat[offset + r * c + i];
  return m;
}

// Random weights for parameters that are initialized to constants.
template <typename Net>
void jitter(Net& net, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  for (auto* p : net.parameters())
    for (auto& v : p->value.mutable_data()) v += 0.1 * standard_normal(rng);
}

}  // namespace

TEST_CASE("gaussian discriminator") {
  auto net = GaussianDiscriminator<double>::create(5, 3);
  jitter(net, 1);
  const auto x = dfd::test::random_values(2 * 4 * 5, 2);
  const auto s = net(TD::constant({2, 4, 5}, x));
  CHECK(s.shape() == ad::Shape{2, 4});
  SUBCASE("matches a hand-written MLP") {
    const auto w1 = values(net.w1), b1 = values(net.b1), w2 = values(net.w2), b2 = values(net.b2);
    for (std::size_t r = 0; r < 8; ++r) {
      double out = b2[0];
      for (std::size_t o = 0; o < 5; ++o) {
        double h = b1[o];
        for (std::size_t i = 0; i < 5; ++i) h += w1[o * 5 + i] * x[r * 5 + i];
        out += w2[o] * (h > 0 ? h : 0.2 * h);
      }
      CHECK(s.data()[r] == doctest::Approx(out).epsilon(1e-12));
    }
  }
  SUBCASE("scores are position-wise") {
    std::vector<double> swapped = x;
    std::swap_ranges(swapped.begin(), swapped.begin() + 5, swapped.begin() + 15);
    const auto t = net(TD::constant({2, 4, 5}, swapped));
    CHECK(t.data()[0] == doctest::Approx(s.data()[3]));
    CHECK(t.data()[3] == doctest::Approx(s.data()[0]));
    CHECK(t.data()[1] == s.data()[1]);
  }
  SUBCASE("parameter count and errors") {
    const auto full = GaussianDiscriminator<float>::create(192, 0);
    std::size_t n = 0;
    for (const auto* p : full.parameters()) n += p->value.numel();
    CHECK(n == 192 * 192 + 192 + 192 + 1);
    CHECK_THROWS_AS(net(TD::constant({1, 4, 6}, std::vector<double>(24))), ArgumentError);
  }
}

TEST_CASE("perlin discriminator") {
  const PerlinDiscriminatorShape shape{6, 8, 2, 2, 2, 3};
  auto net = PerlinDiscriminator<double>::create(shape, 4);
  jitter(net, 5);
  const auto x = dfd::test::random_values(2 * 6 * 6, 6);
  const auto s = net(TD::constant({2, 6, 6}, x));
  REQUIRE(s.shape() == ad::Shape{2, 6});
  SUBCASE("matches a first-principles transformer") {
    for (std::size_t b = 0; b < 2; ++b) {
      const auto ref = perlin_reference(net, rows_of(x, b * 36, 6, 6));
      for (std::size_t p = 0; p < 6; ++p) CHECK(s.data()[b * 6 + p] == doctest::Approx(ref[p]).epsilon(1e-10));
    }
  }
  SUBCASE("attention weights are row-stochastic") {
    const auto tokens = TD::constant({2, 6, 8}, dfd::test::random_values(96, 7));
    const auto w = net.attention_weights(tokens);
    CHECK(w.shape() == ad::Shape{4, 6, 6});
    for (std::size_t r = 0; r < 24; ++r) {
      double total = 0;
      for (std::size_t j = 0; j < 6; ++j) total += w.data()[r * 6 + j];
      CHECK(total == doctest::Approx(1.0));
    }
  }
  SUBCASE("zero query and key projections attend uniformly") {
    auto flat = PerlinDiscriminator<double>::create(shape, 9);
    auto qkv = flat.qkv_w.value.mutable_data();
    std::fill(qkv.begin(), qkv.begin() + 2 * 8 * 8, 0.0);
    auto qkv_b = flat.qkv_b.value.mutable_data();
    std::fill(qkv_b.begin(), qkv_b.begin() + 16, 0.0);
    const auto tokens = TD::constant({1, 6, 8}, dfd::test::random_values(48, 8));
    const auto weights = flat.attention_weights(tokens);
    for (double v : weights.data()) CHECK(v == doctest::Approx(1.0 / 6));
    // Every output token is then the projected mean of the values.
    const auto out = flat.attention(tokens);
    for (std::size_t i = 1; i < 6; ++i)
      for (std::size_t k = 0; k < 8; ++k) CHECK(out.data()[i * 8 + k] == doctest::Approx(out.data()[k]));
  }
  SUBCASE("tokens interact through attention") {
    std::vector<double> changed = x;
    changed[5 * 6] += 1.0;  // last position of the first sample
    const auto t = net(TD::constant({2, 6, 6}, changed));
    CHECK(t.data()[0] != doctest::Approx(s.data()[0]).epsilon(1e-9));
    CHECK(t.data()[6] == s.data()[6]);
  }
  SUBCASE("grid and width checks") {
    CHECK_THROWS_AS(net(TD::constant({1, 4, 6}, std::vector<double>(24))), ConfigError);
    CHECK_THROWS_AS(net(TD::constant({1, 6, 5}, std::vector<double>(30))), ArgumentError);
    CHECK_THROWS_AS(PerlinDiscriminator<double>::create({6, 9, 2, 2, 2, 3}, 0), ConfigError);
  }
  SUBCASE("float and double agree") {
    const auto f = net.cast<float>();
    std::vector<float> xf(x.begin(), x.end());
    const auto sf = f(ad::Tensor<float>::constant({2, 6, 6}, xf));
    for (std::size_t i = 0; i < 12; ++i) CHECK(sf.data()[i] == doctest::Approx(s.data()[i]).epsilon(1e-4));
  }
}

TEST_CASE("discriminator parameters round-trip through arrays") {
  const PerlinDiscriminatorShape shape{6, 8, 2, 2, 2, 3};
  const auto a = PerlinDiscriminator<float>::create(shape, 1);
  auto b = PerlinDiscriminator<float>::create(shape, 2);
  const auto arrays = to_arrays<float>(a.parameters());
  CHECK(arrays.size() == 19);
  load_arrays<float>(b.parameters(), arrays);
  const auto x = ad::Tensor<float>::constant({1, 6, 6}, std::vector<float>(36, 0.3f));
  const auto sa = a(x), sb = b(x);
  CHECK(std::vector<float>(sa.data().begin(), sa.data().end()) == std::vector<float>(sb.data().begin(), sb.data().end()));

  auto missing = arrays;
  missing.pop_back();
  CHECK_THROWS_AS(load_arrays<float>(b.parameters(), missing), ConfigError);
  auto reshaped = arrays;
  reshaped[0].dims = {6, 8};
  CHECK_THROWS_AS(load_arrays<float>(b.parameters(), reshaped), ConfigError);

  // Initialization is a pure function of the seed.
  const auto again = PerlinDiscriminator<float>::create(shape, 1);
  const auto& loaded = b;
  CHECK(to_arrays<float>(again.parameters())[0].values == arrays[0].values);
  CHECK(to_arrays<float>(loaded.parameters())[0].values == arrays[0].values);
}
