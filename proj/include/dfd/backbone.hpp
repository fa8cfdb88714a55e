#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dfd/autodiff/checkpoint.hpp"
#include "dfd/autodiff/ops.hpp"
#include "dfd/autodiff/optim.hpp"
#include "dfd/feature_map.hpp"
#include "dfd/image.hpp"

namespace dfd {

struct BackboneSpec {
  std::string kind = "random-conv";  ///< "random-conv" or "imported"
  std::uint64_t seed = 0;
  std::vector<int> taps{2, 3};       ///< trunk levels concatenated into patch features
  int aggregation = 3;               ///< local averaging neighborhood (odd)
  std::filesystem::path weights;     ///< DFDW file for "imported"
};

/// Frozen convolutional trunk. Every stage is a stride-1 3x3 convolution
/// followed by average pooling, so the grid stays centered and both borders
/// see the same reflect-101 padding.
///
///   stem   conv (3 -> 32),   ReLU, pool 4x4   -> level 1, stride 4
///   stage  conv (32 -> 64),  pool 2x2, ReLU   -> level 2, stride 8
///   stage  conv (64 -> 128), pool 2x2, ReLU   -> level 3, stride 16
///
/// Stage levels are tapped before their ReLU: rectified random features are
/// sparse and one-sided, which hides deviations below zero. Tapped levels are
/// locally averaged, upsampled to the finest tapped grid and concatenated
/// along channels (64 + 128 = 192 by default).
class Backbone {
 public:
  explicit Backbone(const BackboneSpec& spec);

  /// Expects a standardized 3-channel image.
  FeatureMap extract(const Image& standardized) const;

  const BackboneSpec& spec() const { return spec_; }
  int channels() const;
  /// Pixel stride of the output grid.
  int stride() const;
  int grid_size(int pixels) const;
  std::uint64_t weight_hash() const;
  std::vector<ad::NamedArray> export_weights() const;

 private:
  struct Conv {
    int in = 0;
    int out = 0;
    std::vector<float> weight;  ///< [out][in][3][3]
    std::vector<float> bias;
  };

  BackboneSpec spec_;
  std::vector<Conv> convs_;
};

/// Level channel widths of the default trunk.
inline constexpr int kLevelChannels[4] = {3, 32, 64, 128};
inline constexpr int kLevelStride[4] = {1, 4, 8, 16};

/// Low/high band features of one image (the high band is empty when the
/// frequency split is disabled).
struct FeaturePair {
  FeatureMap low;
  FeatureMap high;
};

/// Standardized image -> split_frequency -> extract on each band.
FeaturePair extract_pair(const Image& standardized, const Backbone& backbone);

/// Position-wise linear map q = W p (W is [C_out, C_in]), optional bias.
template <typename T>
struct FeatureAdaptor {
  ad::Parameter<T> weight;
  std::optional<ad::Parameter<T>> bias;

  static FeatureAdaptor identity(int channels, bool with_bias = false);
  /// p: [..., C] -> [..., C]
  ad::Tensor<T> operator()(const ad::Tensor<T>& p) const;
  std::vector<ad::Parameter<T>*> parameters();
  int channels() const { return static_cast<int>(weight.value.dim(0)); }

  template <typename U>
  FeatureAdaptor<U> cast() const {
    FeatureAdaptor<U> out;
    out.weight = weight.template cast<U>();
    if (bias) out.bias = bias->template cast<U>();
    return out;
  }
};

/// Off-tape application of a trained adaptor.
FeatureMap adapt(const FeatureMap& p, const FeatureAdaptor<float>& adaptor);

/// Packs a FeatureMap batch into a [B, h*w, C] tensor.
template <typename T>
ad::Tensor<T> to_tensor(const std::vector<const FeatureMap*>& maps, bool requires_grad = false);

extern template struct FeatureAdaptor<float>;
extern template struct FeatureAdaptor<double>;

}  // namespace dfd
