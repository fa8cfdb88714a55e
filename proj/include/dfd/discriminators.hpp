#pragma once

#include <cstdint>
#include <vector>

#include "dfd/autodiff/checkpoint.hpp"
#include "dfd/autodiff/ops.hpp"
#include "dfd/autodiff/optim.hpp"

namespace dfd {

/// Per-position scores, positive for normal features and negative for
/// anomalous ones. Tensors are [B, h*w].
template <typename T>
using ScoreTensor = ad::Tensor<T>;

/// Position-wise MLP C -> C -> 1, leaky ReLU (0.2) hidden activation.
template <typename T>
struct GaussianDiscriminator {
  ad::Parameter<T> w1, b1, w2, b2;

  static GaussianDiscriminator create(int channels, std::uint64_t seed);
  /// q: [B, P, C] -> [B, P]
  ScoreTensor<T> operator()(const ad::Tensor<T>& q) const;
  std::vector<ad::Parameter<T>*> parameters();
  std::vector<const ad::Parameter<T>*> parameters() const;
  int channels() const { return static_cast<int>(w1.value.dim(1)); }

  template <typename U>
  GaussianDiscriminator<U> cast() const {
    return {w1.template cast<U>(), b1.template cast<U>(), w2.template cast<U>(), b2.template cast<U>()};
  }
};

struct PerlinDiscriminatorShape {
  int channels = 192;
  int width = 128;  ///< token width D
  int heads = 4;
  int mlp_ratio = 2;
  int grid_h = 8;
  int grid_w = 8;
};

/// Linear C -> D, learned positional embeddings over the training grid, one
/// pre-norm transformer encoder layer (multi-head self-attention + GELU MLP),
/// final layer norm and a linear D -> 1 head.
template <typename T>
struct PerlinDiscriminator {
  PerlinDiscriminatorShape shape;
  ad::Parameter<T> proj_w, proj_b, pos;
  ad::Parameter<T> ln1_g, ln1_b, qkv_w, qkv_b, attn_w, attn_b;
  ad::Parameter<T> ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  ad::Parameter<T> lnf_g, lnf_b, head_w, head_b;

  static PerlinDiscriminator create(const PerlinDiscriminatorShape& shape, std::uint64_t seed);
  /// q: [B, P, C] -> [B, P]; P must equal grid_h * grid_w (ConfigError otherwise).
  ScoreTensor<T> operator()(const ad::Tensor<T>& q) const;
  /// Multi-head self-attention block (no residual) on tokens x: [B, P, D].
  ad::Tensor<T> attention(const ad::Tensor<T>& x) const;
  /// Attention weights [B*heads, P, P] for tokens x (diagnostics and tests).
  ad::Tensor<T> attention_weights(const ad::Tensor<T>& x) const;

  std::vector<ad::Parameter<T>*> parameters();
  std::vector<const ad::Parameter<T>*> parameters() const;

  template <typename U>
  PerlinDiscriminator<U> cast() const {
    PerlinDiscriminator<U> out;
    out.shape = shape;
    auto src = parameters();
    auto dst = out.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<U>();
    return out;
  }
};

/// Flattens parameters to DFDW records (values rounded to f32).
template <typename T>
std::vector<ad::NamedArray> to_arrays(const std::vector<const ad::Parameter<T>*>& params);
/// Copies matching records into `params`; every parameter must be present
/// with the same shape (ConfigError otherwise).
template <typename T>
void load_arrays(const std::vector<ad::Parameter<T>*>& params, const std::vector<ad::NamedArray>& arrays);

extern template struct GaussianDiscriminator<float>;
extern template struct GaussianDiscriminator<double>;
extern template struct PerlinDiscriminator<float>;
extern template struct PerlinDiscriminator<double>;

}  // namespace dfd
