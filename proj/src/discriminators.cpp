#include "dfd/discriminators.hpp"

#include <cmath>

#include "dfd/error.hpp"
#include "dfd/rng.hpp"

namespace dfd {

namespace {

using ad::Shape;

template <typename T>
ad::Parameter<T> uniform_param(const std::string& name, Shape shape, double bound, std::uint64_t seed) {
  Rng rng = make_rng(derive_seed(seed, name));
  std::vector<T> v(ad::numel(shape));
  for (auto& x : v) x = static_cast<T>(uniform(rng, -bound, bound));
  return ad::Parameter<T>(name, std::move(shape), std::move(v));
}

template <typename T>
ad::Parameter<T> normal_param(const std::string& name, Shape shape, double std, std::uint64_t seed) {
  Rng rng = make_rng(derive_seed(seed, name));
  std::vector<T> v(ad::numel(shape));
  for (auto& x : v) x = static_cast<T>(std * standard_normal(rng));
  return ad::Parameter<T>(name, std::move(shape), std::move(v));
}

template <typename T>
ad::Parameter<T> filled_param(const std::string& name, Shape shape, T value) {
  const auto n = ad::numel(shape);
  return ad::Parameter<T>(name, std::move(shape), std::vector<T>(n, value));
}

// Kaiming-uniform for a ReLU-family layer.
double kaiming_bound(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }
double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Affine layer norm over the last dimension.
template <typename T>
ad::Tensor<T> layer_norm(const ad::Tensor<T>& x, const ad::Parameter<T>& g, const ad::Parameter<T>& b) {
  return ad::add(ad::mul(ad::layernorm(x), g.value), b.value);
}

}  // namespace

template <typename T>
GaussianDiscriminator<T> GaussianDiscriminator<T>::create(int channels, std::uint64_t seed) {
  const auto c = static_cast<std::size_t>(channels);
  GaussianDiscriminator d;
  d.w1 = uniform_param<T>("gauss.w1", {c, c}, kaiming_bound(c), seed);
  d.b1 = filled_param<T>("gauss.b1", {c}, T(0));
  d.w2 = uniform_param<T>("gauss.w2", {1, c}, kaiming_bound(c), seed);
  d.b2 = filled_param<T>("gauss.b2", {1}, T(0));
  return d;
}

template <typename T>
ScoreTensor<T> GaussianDiscriminator<T>::operator()(const ad::Tensor<T>& q) const {
  if (q.rank() != 3 || q.dim(2) != w1.value.dim(1)) {
    throw ArgumentError("gaussian discriminator: expected [B, P, " + std::to_string(w1.value.dim(1)) + "], got " +
                        ad::to_string(q.shape()));
  }
  const auto h = ad::leaky_relu(ad::linear(q, w1.value, b1.value), T(0.2));
  const auto s = ad::linear(h, w2.value, b2.value);
  return ad::reshape(s, {q.dim(0), q.dim(1)});
}

template <typename T>
std::vector<ad::Parameter<T>*> GaussianDiscriminator<T>::parameters() {
  return {&w1, &b1, &w2, &b2};
}

template <typename T>
std::vector<const ad::Parameter<T>*> GaussianDiscriminator<T>::parameters() const {
  return {&w1, &b1, &w2, &b2};
}

template <typename T>
PerlinDiscriminator<T> PerlinDiscriminator<T>::create(const PerlinDiscriminatorShape& s, std::uint64_t seed) {
  if (s.width % s.heads != 0) throw ConfigError("perlin discriminator: width must be divisible by heads");
  const auto c = static_cast<std::size_t>(s.channels);
  const auto d = static_cast<std::size_t>(s.width);
  const auto m = d * static_cast<std::size_t>(s.mlp_ratio);
  const auto p = static_cast<std::size_t>(s.grid_h) * static_cast<std::size_t>(s.grid_w);
  PerlinDiscriminator net;
  net.shape = s;
  net.proj_w = uniform_param<T>("perlin.proj_w", {d, c}, kaiming_bound(c), seed);
  net.proj_b = filled_param<T>("perlin.proj_b", {d}, T(0));
  net.pos = normal_param<T>("perlin.pos", {p, d}, 0.02, seed);
  net.ln1_g = filled_param<T>("perlin.ln1_g", {d}, T(1));
  net.ln1_b = filled_param<T>("perlin.ln1_b", {d}, T(0));
  net.qkv_w = uniform_param<T>("perlin.qkv_w", {3 * d, d}, xavier_bound(d, 3 * d), seed);
  net.qkv_b = filled_param<T>("perlin.qkv_b", {3 * d}, T(0));
  net.attn_w = uniform_param<T>("perlin.attn_w", {d, d}, xavier_bound(d, d), seed);
  net.attn_b = filled_param<T>("perlin.attn_b", {d}, T(0));
  net.ln2_g = filled_param<T>("perlin.ln2_g", {d}, T(1));
  net.ln2_b = filled_param<T>("perlin.ln2_b", {d}, T(0));
  net.fc1_w = uniform_param<T>("perlin.fc1_w", {m, d}, xavier_bound(d, m), seed);
  net.fc1_b = filled_param<T>("perlin.fc1_b", {m}, T(0));
  net.fc2_w = uniform_param<T>("perlin.fc2_w", {d, m}, xavier_bound(m, d), seed);
  net.fc2_b = filled_param<T>("perlin.fc2_b", {d}, T(0));
  net.lnf_g = filled_param<T>("perlin.lnf_g", {d}, T(1));
  net.lnf_b = filled_param<T>("perlin.lnf_b", {d}, T(0));
  net.head_w = uniform_param<T>("perlin.head_w", {1, d}, kaiming_bound(d), seed);
  net.head_b = filled_param<T>("perlin.head_b", {1}, T(0));
  return net;
}

template <typename T>
ad::Tensor<T> PerlinDiscriminator<T>::attention_weights(const ad::Tensor<T>& x) const {
  const auto d = static_cast<std::size_t>(shape.width);
  const auto heads = static_cast<std::size_t>(shape.heads);
  const auto qkv = ad::linear(x, qkv_w.value, qkv_b.value);
  const auto q = ad::split_heads(ad::slice_last(qkv, 0, d), heads);
  const auto k = ad::split_heads(ad::slice_last(qkv, d, d), heads);
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(d / heads));
  return ad::softmax(ad::scale(ad::bmm(q, k, true), inv_sqrt));
}

template <typename T>
ad::Tensor<T> PerlinDiscriminator<T>::attention(const ad::Tensor<T>& x) const {
  const auto d = static_cast<std::size_t>(shape.width);
  const auto heads = static_cast<std::size_t>(shape.heads);
  const auto qkv = ad::linear(x, qkv_w.value, qkv_b.value);
  const auto q = ad::split_heads(ad::slice_last(qkv, 0, d), heads);
  const auto k = ad::split_heads(ad::slice_last(qkv, d, d), heads);
  const auto v = ad::split_heads(ad::slice_last(qkv, 2 * d, d), heads);
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(d / heads));
  const auto weights = ad::softmax(ad::scale(ad::bmm(q, k, true), inv_sqrt));
  const auto mixed = ad::merge_heads(ad::bmm(weights, v), heads);
  return ad::linear(mixed, attn_w.value, attn_b.value);
}

template <typename T>
ScoreTensor<T> PerlinDiscriminator<T>::operator()(const ad::Tensor<T>& q) const {
  if (q.rank() != 3 || q.dim(2) != static_cast<std::size_t>(shape.channels)) {
    throw ArgumentError("perlin discriminator: expected [B, P, " + std::to_string(shape.channels) + "], got " +
                        ad::to_string(q.shape()));
  }
  if (q.dim(1) != pos.value.dim(0)) {
    throw ConfigError("perlin discriminator: input grid has " + std::to_string(q.dim(1)) +
                      " positions but positional embeddings were trained for " +
                      std::to_string(shape.grid_h) + "x" + std::to_string(shape.grid_w));
  }
  auto x = ad::add(ad::linear(q, proj_w.value, proj_b.value), pos.value);
  x = ad::add(x, attention(layer_norm(x, ln1_g, ln1_b)));
  const auto hidden = ad::gelu(ad::linear(layer_norm(x, ln2_g, ln2_b), fc1_w.value, fc1_b.value));
  x = ad::add(x, ad::linear(hidden, fc2_w.value, fc2_b.value));
  const auto s = ad::linear(layer_norm(x, lnf_g, lnf_b), head_w.value, head_b.value);
  return ad::reshape(s, {q.dim(0), q.dim(1)});
}

template <typename T>
std::vector<ad::Parameter<T>*> PerlinDiscriminator<T>::parameters() {
  return {&proj_w, &proj_b, &pos,   &ln1_g, &ln1_b, &qkv_w, &qkv_b, &attn_w, &attn_b, &ln2_g,
          &ln2_b,  &fc1_w,  &fc1_b, &fc2_w, &fc2_b, &lnf_g, &lnf_b, &head_w, &head_b};
}

template <typename T>
std::vector<const ad::Parameter<T>*> PerlinDiscriminator<T>::parameters() const {
  return {&proj_w, &proj_b, &pos,   &ln1_g, &ln1_b, &qkv_w, &qkv_b, &attn_w, &attn_b, &ln2_g,
          &ln2_b,  &fc1_w,  &fc1_b, &fc2_w, &fc2_b, &lnf_g, &lnf_b, &head_w, &head_b};
}

template <typename T>
std::vector<ad::NamedArray> to_arrays(const std::vector<const ad::Parameter<T>*>& params) {
  std::vector<ad::NamedArray> out;
  for (const auto* p : params) {
    ad::NamedArray a;
    a.name = p->name;
    for (auto d : p->value.shape()) a.dims.push_back(static_cast<std::uint32_t>(d));
    a.values.assign(p->value.data().begin(), p->value.data().end());
    out.push_back(std::move(a));
  }
  return out;
}

template <typename T>
void load_arrays(const std::vector<ad::Parameter<T>*>& params, const std::vector<ad::NamedArray>& arrays) {
  for (auto* p : params) {
    const ad::NamedArray* found = nullptr;
    for (const auto& a : arrays) {
      if (a.name == p->name) found = &a;
    }
    if (!found) throw ConfigError("checkpoint lacks parameter '" + p->name + "'");
    ad::Shape shape(found->dims.begin(), found->dims.end());
    if (shape != p->value.shape()) {
      throw ConfigError("checkpoint shape " + ad::to_string(shape) + " for '" + p->name + "' != " +
                        ad::to_string(p->value.shape()));
    }
    std::vector<T> values(found->values.begin(), found->values.end());
    *p = ad::Parameter<T>(p->name, shape, std::move(values));
  }
}

template struct GaussianDiscriminator<float>;
template struct GaussianDiscriminator<double>;
template struct PerlinDiscriminator<float>;
template struct PerlinDiscriminator<double>;
template std::vector<ad::NamedArray> to_arrays<float>(const std::vector<const ad::Parameter<float>*>&);
template std::vector<ad::NamedArray> to_arrays<double>(const std::vector<const ad::Parameter<double>*>&);
template void load_arrays<float>(const std::vector<ad::Parameter<float>*>&, const std::vector<ad::NamedArray>&);
template void load_arrays<double>(const std::vector<ad::Parameter<double>*>&, const std::vector<ad::NamedArray>&);

}  // namespace dfd
