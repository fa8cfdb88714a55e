#include "dfd/grad_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

#include "dfd/backbone.hpp"
#include "dfd/error.hpp"
#include "dfd/losses.hpp"
#include "dfd/rng.hpp"

namespace dfd {

namespace {

using ad::Shape;
using TD = ad::Tensor<double>;

class Suite {
 public:
  explicit Suite(const GradSuiteOptions& opts) : opts_(opts), rng_(make_rng(derive_seed(opts.seed, "gradsuite"))) {}

  std::vector<double> uniform_values(std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(rng_, lo, hi);
    return v;
  }

  // Values at least `gap` away from every kink in `kinks`.
  std::vector<double> away_from(std::size_t n, std::vector<double> kinks, double gap = 0.05) {
    std::vector<double> v(n);
    for (auto& x : v) {
      do {
        x = uniform(rng_, -1.5, 1.5);
      } while (std::any_of(kinks.begin(), kinks.end(), [&](double k) { return std::abs(x - k) < gap; }));
    }
    return v;
  }

  TD leaf(Shape s, std::vector<double> v) { return TD::leaf(std::move(s), std::move(v)); }
  TD leaf(Shape s) { return leaf(s, uniform_values(ad::numel(s))); }

  // Contracts a tensor with fixed random weights so every output element
  // reaches the scalar with a distinct coefficient.
  TD probe(const TD& t) {
    auto it = weights_.find(t.numel());
    if (it == weights_.end()) it = weights_.emplace(t.numel(), uniform_values(t.numel())).first;
    return ad::sum(ad::mul(t, TD::constant(t.shape(), it->second)));
  }

  void check(const std::string& name, const std::function<TD()>& f, std::vector<TD> leaves) {
    entries_.push_back({name, ad::grad_check(f, std::move(leaves), opts_.step, opts_.tol, opts_.max_coords)});
  }

  std::vector<GradSuiteEntry> take() { return std::move(entries_); }
  Rng& rng() { return rng_; }
  const GradSuiteOptions& opts() const { return opts_; }

 private:
  GradSuiteOptions opts_;
  Rng rng_;
  std::map<std::size_t, std::vector<double>> weights_;
  std::vector<GradSuiteEntry> entries_;
};

template <typename P>
std::vector<TD> values_of(const std::vector<P*>& params) {
  std::vector<TD> out;
  for (auto* p : params) out.push_back(p->value);
  return out;
}

void primitives(Suite& s) {
  {
    auto a = s.leaf({2, 3, 4}), b = s.leaf({4, 5});
    s.check("matmul", [&] { return s.probe(ad::matmul(a, b)); }, {a, b});
  }
  {
    auto x = s.leaf({2, 3, 4}), w = s.leaf({5, 4}), b = s.leaf({5});
    s.check("linear", [&] { return s.probe(ad::linear(x, w, b)); }, {x, w, b});
  }
  {
    auto a = s.leaf({2, 3, 4}), b = s.leaf({2, 4, 5}), bt = s.leaf({2, 5, 4});
    s.check("bmm", [&] { return s.probe(ad::bmm(a, b)); }, {a, b});
    s.check("bmm_transposed", [&] { return s.probe(ad::bmm(a, bt, true)); }, {a, bt});
  }
  {
    auto a = s.leaf({2, 3, 4}), b = s.leaf({3, 4}), c = s.leaf({4});
    s.check("add", [&] { return s.probe(ad::add(a, c)); }, {a, c});
    s.check("sub", [&] { return s.probe(ad::sub(a, b)); }, {a, b});
    s.check("mul", [&] { return s.probe(ad::mul(a, b)); }, {a, b});
    s.check("scale", [&] { return s.probe(ad::scale(a, 1.7)); }, {a});
    s.check("add_scalar", [&] { return s.probe(ad::square(ad::add_scalar(a, 0.3))); }, {a});
  }
  {
    auto x = s.leaf({3, 5}, s.away_from(15, {0.0}));
    s.check("relu", [&] { return s.probe(ad::relu(x)); }, {x});
    s.check("leaky_relu", [&] { return s.probe(ad::leaky_relu(x, 0.2)); }, {x});
    auto h = s.leaf({3, 5}, s.away_from(15, {0.8, -0.8}));
    s.check("truncated_hinge_pos", [&] { return s.probe(ad::truncated_hinge_pos(h, 0.8)); }, {h});
    s.check("truncated_hinge_neg", [&] { return s.probe(ad::truncated_hinge_neg(h, 0.8)); }, {h});
  }
  {
    auto x = s.leaf({3, 5}, s.uniform_values(15, -3.0, 3.0));
    s.check("gelu", [&] { return s.probe(ad::gelu(x)); }, {x});
    s.check("sigmoid", [&] { return s.probe(ad::sigmoid(x)); }, {x});
    s.check("log_sigmoid", [&] { return s.probe(ad::log_sigmoid(x)); }, {x});
    s.check("square", [&] { return s.probe(ad::square(x)); }, {x});
    s.check("softmax", [&] { return s.probe(ad::softmax(x)); }, {x});
    s.check("layernorm", [&] { return s.probe(ad::layernorm(x)); }, {x});
    s.check("sum", [&] { return ad::square(ad::sum(x)); }, {x});
    s.check("mean", [&] { return ad::square(ad::mean(x)); }, {x});
  }
  {
    // Distinct values spaced well beyond the step keep the argmax stable.
    std::vector<double> v(15);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * static_cast<double>((i * 7) % 15) - 0.7;
    auto x = s.leaf({3, 5}, v);
    s.check("max_over_positions", [&] { return s.probe(ad::max_over_positions(x)); }, {x});
  }
  {
    auto a = s.leaf({2, 3, 4}), b = s.leaf({2, 3, 4});
    s.check("cosine_similarity", [&] { return s.probe(ad::cosine_similarity(a, b)); }, {a, b});
  }
  {
    auto x = s.leaf({2, 3, 8});
    s.check("reshape", [&] { return s.probe(ad::square(ad::reshape(x, {6, 8}))); }, {x});
    s.check("slice_last", [&] { return s.probe(ad::slice_last(x, 2, 3)); }, {x});
    s.check("split_heads", [&] { return s.probe(ad::split_heads(x, 2)); }, {x});
    auto y = s.leaf({4, 3, 4});
    s.check("merge_heads", [&] { return s.probe(ad::merge_heads(y, 2)); }, {y});
  }
}

void networks(Suite& s) {
  const auto& o = s.opts();
  const std::size_t b = static_cast<std::size_t>(o.batch);
  const std::size_t p = static_cast<std::size_t>(o.perlin.grid_h) * o.perlin.grid_w;
  const std::size_t c = static_cast<std::size_t>(o.channels);

  {
    auto adaptor = FeatureAdaptor<double>::identity(o.channels, true);
    auto w = adaptor.weight.value.mutable_data();
    for (auto& v : w) v += uniform(s.rng(), -0.1, 0.1);
    auto x = s.leaf({b, p, c});
    auto leaves = values_of(adaptor.parameters());
    leaves.push_back(x);
    s.check("adaptor", [&] { return s.probe(adaptor(x)); }, leaves);
  }
  {
    auto g = GaussianDiscriminator<double>::create(o.channels, derive_seed(o.seed, "gradsuite.gauss"));
    // Position-wise, so a few positions suffice. Inputs are resampled until no
    // hidden unit sits within reach of the leaky-ReLU kink.
    const std::size_t pg = std::min<std::size_t>(p, 4);
    TD q;
    for (int attempt = 0;; ++attempt) {
      q = s.leaf({b, pg, c});
      const auto z = ad::linear(q, g.w1.value, g.b1.value);
      const auto d = z.data();
      const double closest = std::transform_reduce(d.begin(), d.end(), std::numeric_limits<double>::infinity(),
                                                   [](double a, double x) { return std::min(a, x); },
                                                   [](double v) { return std::abs(v); });
      if (closest > 4.0 * o.step) break;
      if (attempt == 100) throw NumericError("gradsuite: could not place inputs away from activation kinks");
    }
    auto leaves = values_of(g.parameters());
    leaves.push_back(q);
    s.check("gaussian_discriminator", [&] { return s.probe(g(q)); }, leaves);
  }
  {
    PerlinDiscriminatorShape shape = o.perlin;
    shape.channels = o.channels;
    auto d = PerlinDiscriminator<double>::create(shape, derive_seed(o.seed, "gradsuite.perlin"));
    auto q = s.leaf({b, p, c});
    auto leaves = values_of(d.parameters());
    leaves.push_back(q);
    s.check("perlin_discriminator", [&] { return s.probe(d(q)); }, leaves);
  }
}

void losses(Suite& s) {
  const auto& o = s.opts();
  const std::size_t b = static_cast<std::size_t>(std::max(o.batch, 2));
  const std::size_t p = 6, c = 4;
  const double theta = 0.8;

  // Sample 0 carries a partial mask, the last sample an empty one.
  std::vector<double> mask_values(b * p, 0.0);
  for (std::size_t i = 0; i < p; i += 2) mask_values[i] = 1.0;
  for (std::size_t k = 1; k + 1 < b; ++k) mask_values[k * p + k % p] = 1.0;
  const auto mask = TD::constant({b, p}, mask_values);

  auto band_scores = [&] {
    return std::vector<TD>{s.leaf({b, p}, s.away_from(b * p, {theta, -theta})),
                           s.leaf({b, p}, s.away_from(b * p, {theta, -theta}))};
  };

  {
    std::vector<TD> qa{s.leaf({b, p, c}), s.leaf({b, p, c})};
    std::vector<TD> qn{s.leaf({b, p, c}), s.leaf({b, p, c})};
    s.check("similarity_loss", [&] { return similarity_loss<double>(qa, qn, mask); },
            {qa[0], qa[1], qn[0], qn[1]});
  }
  {
    auto sn = band_scores(), sa = band_scores();
    for (auto kind : {LossKind::kHinge, LossKind::kCrossEntropy, LossKind::kFocal, LossKind::kMse}) {
      s.check("gaussian_loss." + to_string(kind), [&] { return gaussian_loss<double>(sn, sa, theta, kind); },
              {sn[0], sn[1], sa[0], sa[1]});
    }
  }
  {
    auto sa = band_scores();
    s.check("pixel_loss", [&] { return pixel_loss<double>(sa, mask, theta); }, {sa[0], sa[1]});
    s.check("pixel_loss.literal", [&] { return pixel_loss<double>(sa, mask, theta, true); }, {sa[0], sa[1]});
  }
  {
    std::vector<double> v0(b * p), v1(b * p);
    for (std::size_t i = 0; i < v0.size(); ++i) {
      v0[i] = 0.13 * static_cast<double>((i * 5) % (b * p)) - 1.0;
      v1[i] = 0.11 * static_cast<double>((i * 7) % (b * p)) - 0.9;
    }
    std::vector<TD> sa{s.leaf({b, p}, v0), s.leaf({b, p}, v1)};
    std::vector<double> tau(b, 1.0);
    tau.back() = 0.0;
    const auto tau_t = TD::constant({b}, tau);
    s.check("cls_loss", [&] { return cls_loss<double>(sa, tau_t); }, {sa[0], sa[1]});

    std::vector<TD> qa{s.leaf({b, p, c}), s.leaf({b, p, c})};
    std::vector<TD> qn{s.leaf({b, p, c}), s.leaf({b, p, c})};
    auto sn = band_scores(), sz = band_scores();
    s.check(
        "total_loss",
        [&] {
          return total_loss<double>(gaussian_loss<double>(sn, sz, theta), pixel_loss<double>(sa, mask, theta),
                                    cls_loss<double>(sa, tau_t), similarity_loss<double>(qa, qn, mask), 2.0, 0.02)
              .total;
        },
        {sa[0], sa[1], sn[0], sn[1], sz[0], sz[1], qa[0], qa[1], qn[0], qn[1]});
  }
}

}  // namespace

GradSuiteOptions default_net_suite(std::uint64_t seed) {
  GradSuiteOptions o;
  o.channels = 192;
  o.perlin = PerlinDiscriminatorShape{};
  o.batch = 1;
  o.max_coords = 16;
  o.seed = seed;
  return o;
}

std::vector<GradSuiteEntry> run_grad_suite(const GradSuiteOptions& opts) {
  if (opts.channels < 1 || opts.batch < 1) throw ArgumentError("gradsuite: channels and batch must be positive");
  Suite s(opts);
  primitives(s);
  networks(s);
  losses(s);
  return s.take();
}

}  // namespace dfd
