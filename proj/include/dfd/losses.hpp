#pragma once

#include <span>
#include <string>
#include <vector>

#include "dfd/autodiff/ops.hpp"
#include "dfd/image.hpp"

namespace dfd {

/// Max-pools an H x W mask onto an h x w grid; H, W must be multiples.
Mask pool_mask(const Mask& m, int grid_h, int grid_w);

/// Replacement for the truncated l1 terms in the Gaussian and pixel losses.
enum class LossKind { kHinge, kCrossEntropy, kFocal, kMse };

/// "hinge", "ce"/"cross-entropy", "focal" or "mse"; ConfigError otherwise.
LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

/// Elementwise penalty for a score that should read "normal" (positive).
///   hinge: max(0, theta - s)    ce: -log sigmoid(s)
///   focal: -sigmoid(-s)^2 log sigmoid(s)    mse: (s - theta)^2
template <typename T>
ad::Tensor<T> normal_penalty(const ad::Tensor<T>& s, T theta, LossKind kind);
/// Elementwise penalty for a score that should read "anomalous" (negative).
template <typename T>
ad::Tensor<T> anomalous_penalty(const ad::Tensor<T>& s, T theta, LossKind kind);

// Band arguments are parallel lists (low, high); a single entry means the
// frequency split is disabled. Masks are constant [B, P] tensors of {0,1}.

/// Sum over bands of the batch mean of (1 - sign * cos(M q_a, M q_n)).
/// Samples whose pooled mask is empty contribute 0.
template <typename T>
ad::Tensor<T> similarity_loss(std::span<const ad::Tensor<T>> qa, std::span<const ad::Tensor<T>> qn,
                              const ad::Tensor<T>& mask, T sign = T(1));

/// Sum over bands of mean(penalty_normal(s_n)) + mean(penalty_anomalous(s_noised)).
template <typename T>
ad::Tensor<T> gaussian_loss(std::span<const ad::Tensor<T>> s_normal, std::span<const ad::Tensor<T>> s_noised,
                            T theta, LossKind kind = LossKind::kHinge);

/// Default (masked mean): mean over normal cells of penalty_normal(s) plus mean
/// over anomalous cells of penalty_anomalous(s), pooled over the batch; a
/// class with no cells contributes 0. With `literal`, the mask multiplies the
/// score inside the penalty and both terms average over every cell.
template <typename T>
ad::Tensor<T> pixel_loss(std::span<const ad::Tensor<T>> s_anomalous, const ad::Tensor<T>& mask, T theta,
                         bool literal = false, LossKind kind = LossKind::kHinge);

/// Sum over bands of the batch mean of (tau - max_p sigmoid(-s))^2; tau is [B].
template <typename T>
ad::Tensor<T> cls_loss(std::span<const ad::Tensor<T>> s_anomalous, const ad::Tensor<T>& tau);

struct LossBundle {
  double sim = 0.0;
  double gau = 0.0;
  double pix = 0.0;
  double cls = 0.0;
  double per = 0.0;
  double total = 0.0;
};

template <typename T>
struct TotalLoss {
  ad::Tensor<T> total;
  LossBundle values;
};

/// per = (pix + cls) / 2; total = gau + lambda_per * per + lambda_sim * sim.
/// Undefined components count as 0.
template <typename T>
TotalLoss<T> total_loss(const ad::Tensor<T>& gau, const ad::Tensor<T>& pix, const ad::Tensor<T>& cls,
                        const ad::Tensor<T>& sim, T lambda_per, T lambda_sim);

}  // namespace dfd
