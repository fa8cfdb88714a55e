#include "dfd/losses.hpp"

#include <algorithm>

#include "dfd/error.hpp"

namespace dfd {

Mask pool_mask(const Mask& m, int grid_h, int grid_w) {
  if (grid_h <= 0 || grid_w <= 0 || m.height % grid_h != 0 || m.width % grid_w != 0) {
    throw ArgumentError("pool_mask: " + std::to_string(m.height) + "x" + std::to_string(m.width) +
                        " is not divisible into " + std::to_string(grid_h) + "x" + std::to_string(grid_w));
  }
  const int bh = m.height / grid_h, bw = m.width / grid_w;
  Mask out(grid_h, grid_w);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.at(y, x)) out.at(y / bh, x / bw) = 1;
  return out;
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "hinge" || name == "truncated-l1") return LossKind::kHinge;
  if (name == "ce" || name == "cross-entropy") return LossKind::kCrossEntropy;
  if (name == "focal") return LossKind::kFocal;
  if (name == "mse") return LossKind::kMse;
  throw ConfigError("unknown loss kind '" + name + "'");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kHinge: return "hinge";
    case LossKind::kCrossEntropy: return "ce";
    case LossKind::kFocal: return "focal";
    case LossKind::kMse: return "mse";
  }
  return "hinge";
}

template <typename T>
ad::Tensor<T> normal_penalty(const ad::Tensor<T>& s, T theta, LossKind kind) {
  switch (kind) {
    case LossKind::kHinge: return ad::truncated_hinge_pos(s, theta);
    case LossKind::kCrossEntropy: return ad::scale(ad::log_sigmoid(s), T(-1));
    case LossKind::kFocal:
      return ad::scale(ad::mul(ad::square(ad::sigmoid(ad::scale(s, T(-1)))), ad::log_sigmoid(s)), T(-1));
    case LossKind::kMse: return ad::square(ad::add_scalar(s, -theta));
  }
  throw ConfigError("unknown loss kind");
}

template <typename T>
ad::Tensor<T> anomalous_penalty(const ad::Tensor<T>& s, T theta, LossKind kind) {
  switch (kind) {
    case LossKind::kHinge: return ad::truncated_hinge_neg(s, theta);
    case LossKind::kCrossEntropy: return ad::scale(ad::log_sigmoid(ad::scale(s, T(-1))), T(-1));
    case LossKind::kFocal:
      return ad::scale(ad::mul(ad::square(ad::sigmoid(s)), ad::log_sigmoid(ad::scale(s, T(-1)))), T(-1));
    case LossKind::kMse: return ad::square(ad::add_scalar(s, theta));
  }
  throw ConfigError("unknown loss kind");
}

namespace {

template <typename T>
void check_bands(std::size_t a, std::size_t b, const char* what) {
  if (a == 0 || a != b) throw ArgumentError(std::string(what) + ": band lists must be nonempty and equal length");
}

// [B, P] mask broadcast to [B, P, C].
template <typename T>
ad::Tensor<T> expand_mask(const ad::Tensor<T>& mask, std::size_t channels) {
  std::vector<T> v;
  v.reserve(mask.numel() * channels);
  for (T m : mask.data()) v.insert(v.end(), channels, m);
  ad::Shape shape = mask.shape();
  shape.push_back(channels);
  return ad::Tensor<T>::constant(std::move(shape), std::move(v));
}

template <typename T>
ad::Tensor<T> complement(const ad::Tensor<T>& mask) {
  std::vector<T> v(mask.data().begin(), mask.data().end());
  for (auto& x : v) x = T(1) - x;
  return ad::Tensor<T>::constant(mask.shape(), std::move(v));
}

template <typename T>
T total_of(const ad::Tensor<T>& t) {
  T s = T(0);
  for (T v : t.data()) s += v;
  return s;
}

}  // namespace

template <typename T>
ad::Tensor<T> similarity_loss(std::span<const ad::Tensor<T>> qa, std::span<const ad::Tensor<T>> qn,
                              const ad::Tensor<T>& mask, T sign) {
  check_bands<T>(qa.size(), qn.size(), "similarity_loss");
  const std::size_t batch = mask.dim(0), positions = mask.numel() / batch;
  std::vector<T> has_mask(batch, T(0));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t p = 0; p < positions; ++p) {
      if (mask.data()[b * positions + p] > T(0)) has_mask[b] = T(1);
    }
  }
  const auto weight = ad::Tensor<T>::constant({batch}, std::move(has_mask));
  ad::Tensor<T> total;
  for (std::size_t i = 0; i < qa.size(); ++i) {
    const auto m = expand_mask(mask, qa[i].dim(-1));
    const auto cos = ad::cosine_similarity(ad::mul(qa[i], m), ad::mul(qn[i], m));
    const auto per_sample = ad::mul(ad::add_scalar(ad::scale(cos, -sign), T(1)), weight);
    const auto band = ad::mean(per_sample);
    total = total.defined() ? ad::add(total, band) : band;
  }
  return total;
}

template <typename T>
ad::Tensor<T> gaussian_loss(std::span<const ad::Tensor<T>> s_normal, std::span<const ad::Tensor<T>> s_noised,
                            T theta, LossKind kind) {
  check_bands<T>(s_normal.size(), s_noised.size(), "gaussian_loss");
  ad::Tensor<T> total;
  for (std::size_t i = 0; i < s_normal.size(); ++i) {
    const auto band = ad::add(ad::mean(normal_penalty(s_normal[i], theta, kind)),
                              ad::mean(anomalous_penalty(s_noised[i], theta, kind)));
    total = total.defined() ? ad::add(total, band) : band;
  }
  return total;
}

template <typename T>
ad::Tensor<T> pixel_loss(std::span<const ad::Tensor<T>> s_anomalous, const ad::Tensor<T>& mask, T theta,
                         bool literal, LossKind kind) {
  if (s_anomalous.empty()) throw ArgumentError("pixel_loss: no bands");
  const auto normal_mask = complement(mask);
  const T n_anom = total_of(mask);
  const T n_norm = total_of(normal_mask);
  ad::Tensor<T> total;
  for (const auto& s : s_anomalous) {
    if (s.shape() != mask.shape()) throw ArgumentError("pixel_loss: score and mask shapes differ");
    ad::Tensor<T> band;
    if (literal) {
      band = ad::add(ad::mean(normal_penalty(ad::mul(s, normal_mask), theta, kind)),
                     ad::mean(anomalous_penalty(ad::mul(s, mask), theta, kind)));
    } else {
      band = ad::Tensor<T>::scalar(T(0));
      if (n_norm > T(0)) {
        band = ad::add(band, ad::scale(ad::sum(ad::mul(normal_penalty(s, theta, kind), normal_mask)), T(1) / n_norm));
      }
      if (n_anom > T(0)) {
        band = ad::add(band, ad::scale(ad::sum(ad::mul(anomalous_penalty(s, theta, kind), mask)), T(1) / n_anom));
      }
    }
    total = total.defined() ? ad::add(total, band) : band;
  }
  return total;
}

template <typename T>
ad::Tensor<T> cls_loss(std::span<const ad::Tensor<T>> s_anomalous, const ad::Tensor<T>& tau) {
  if (s_anomalous.empty()) throw ArgumentError("cls_loss: no bands");
  ad::Tensor<T> total;
  for (const auto& s : s_anomalous) {
    if (tau.rank() != 1 || tau.dim(0) != s.dim(0)) throw ArgumentError("cls_loss: tau must be [B]");
    const auto peak = ad::max_over_positions(ad::sigmoid(ad::scale(s, T(-1))));
    const auto band = ad::mean(ad::square(ad::sub(tau, peak)));
    total = total.defined() ? ad::add(total, band) : band;
  }
  return total;
}

template <typename T>
TotalLoss<T> total_loss(const ad::Tensor<T>& gau, const ad::Tensor<T>& pix, const ad::Tensor<T>& cls,
                        const ad::Tensor<T>& sim, T lambda_per, T lambda_sim) {
  auto value_or_zero = [](const ad::Tensor<T>& t) { return t.defined() ? t : ad::Tensor<T>::scalar(T(0)); };
  const auto g = value_or_zero(gau), p = value_or_zero(pix), c = value_or_zero(cls), s = value_or_zero(sim);
  const auto per = ad::scale(ad::add(p, c), T(0.5));
  const auto total = ad::add(ad::add(g, ad::scale(per, lambda_per)), ad::scale(s, lambda_sim));
  LossBundle b;
  b.sim = s.item();
  b.gau = g.item();
  b.pix = p.item();
  b.cls = c.item();
  b.per = per.item();
  b.total = total.item();
  return {total, b};
}

#define DFD_INSTANTIATE_LOSSES(T)                                                                                 \
  template ad::Tensor<T> normal_penalty(const ad::Tensor<T>&, T, LossKind);                                      \
  template ad::Tensor<T> anomalous_penalty(const ad::Tensor<T>&, T, LossKind);                                   \
  template ad::Tensor<T> similarity_loss(std::span<const ad::Tensor<T>>, std::span<const ad::Tensor<T>>,         \
                                         const ad::Tensor<T>&, T);                                                \
  template ad::Tensor<T> gaussian_loss(std::span<const ad::Tensor<T>>, std::span<const ad::Tensor<T>>, T,        \
                                       LossKind);                                                                 \
  template ad::Tensor<T> pixel_loss(std::span<const ad::Tensor<T>>, const ad::Tensor<T>&, T, bool, LossKind);    \
  template ad::Tensor<T> cls_loss(std::span<const ad::Tensor<T>>, const ad::Tensor<T>&);                         \
  template TotalLoss<T> total_loss(const ad::Tensor<T>&, const ad::Tensor<T>&, const ad::Tensor<T>&,             \
                                   const ad::Tensor<T>&, T, T);

DFD_INSTANTIATE_LOSSES(float)
DFD_INSTANTIATE_LOSSES(double)

}  // namespace dfd
