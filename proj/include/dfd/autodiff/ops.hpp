#pragma once

#include "dfd/autodiff/tensor.hpp"

namespace dfd::ad {

// Every op validates shapes (ArgumentError) and rejects non-finite results
// (NumericError naming the op). "Suffix broadcast" means b's shape equals a
// trailing slice of a's shape, e.g. [B,T,D] + [T,D] or [B,T,D] + [D].

/// a[..., K] x b[K, N] -> [..., N]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// x[..., in] x w[out, in]^T (+ bias[out]) -> [..., out]
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias = {});
/// Batched product a[B,M,K] x b[B,K,N]; with transpose_b, b is [B,N,K].
template <typename T> Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false);

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);

template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& a, T slope);
template <typename T> Tensor<T> gelu(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
/// log(sigmoid(a)), evaluated without overflow.
template <typename T> Tensor<T> log_sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);

/// Softmax over the last dimension.
template <typename T> Tensor<T> softmax(const Tensor<T>& a);
/// Normalizes the last dimension to zero mean, unit variance (no affine).
template <typename T> Tensor<T> layernorm(const Tensor<T>& a, T eps = T(1e-5));

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
/// a[B, ...] -> [B]: maximum over all non-batch positions. The gradient goes
/// to the first maximal element.
template <typename T> Tensor<T> max_over_positions(const Tensor<T>& a);
/// a, b [B, ...] -> [B]: cosine of the flattened per-batch vectors. A zero
/// vector yields cosine 0 with zero gradient.
template <typename T> Tensor<T> cosine_similarity(const Tensor<T>& a, const Tensor<T>& b);

/// max(0, theta - x)
template <typename T> Tensor<T> truncated_hinge_pos(const Tensor<T>& x, T theta);
/// max(0, theta + x)
template <typename T> Tensor<T> truncated_hinge_neg(const Tensor<T>& x, T theta);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
/// Columns [start, start + len) of the last dimension.
template <typename T> Tensor<T> slice_last(const Tensor<T>& a, std::size_t start, std::size_t len);
/// [B, T, H*d] -> [B*H, T, d]
template <typename T> Tensor<T> split_heads(const Tensor<T>& x, std::size_t heads);
/// [B*H, T, d] -> [B, T, H*d]
template <typename T> Tensor<T> merge_heads(const Tensor<T>& x, std::size_t heads);

}  // namespace dfd::ad
