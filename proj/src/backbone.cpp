#include "dfd/backbone.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "dfd/aligned.hpp"
#include "dfd/error.hpp"
#include "dfd/frequency.hpp"
#include "dfd/rng.hpp"

namespace dfd {
namespace fs = std::filesystem;

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

// HWC activation buffer.
struct Act {
  int h = 0, w = 0, c = 0;
  AlignedVector<float> data;
};

Act conv3x3(const Act& x, int out_c, const std::vector<float>& weight,
                 const std::vector<float>& bias) {
  const int oh = x.h;
  const int ow = x.w;
  const int k = x.c * 9;
  RowMat cols(static_cast<Eigen::Index>(oh) * ow, k);
  for (int y = 0; y < oh; ++y) {
    for (int xx = 0; xx < ow; ++xx) {
      float* row = cols.row(static_cast<Eigen::Index>(y) * ow + xx).data();
      for (int ci = 0; ci < x.c; ++ci) {
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = reflect101(y + ky - 1, x.h);
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = reflect101(xx + kx - 1, x.w);
            row[ci * 9 + ky * 3 + kx] = x.data[(static_cast<std::size_t>(sy) * x.w + sx) * x.c + ci];
          }
        }
      }
    }
  }
  Eigen::Map<const RowMat> w(weight.data(), out_c, k);
  RowMat y = cols * w.transpose();
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias.data(), out_c);
  Act out{oh, ow, out_c, AlignedVector<float>(static_cast<std::size_t>(oh) * ow * out_c)};
  Eigen::Map<RowMat>(out.data.data(), static_cast<Eigen::Index>(oh) * ow, out_c) = y;
  return out;
}

Act relu(Act x) {
  for (auto& v : x.data) v = std::max(v, 0.0f);
  return x;
}

Act avgpool2(const Act& x) {
  Act out{x.h / 2, x.w / 2, x.c, {}};
  out.data.assign(static_cast<std::size_t>(out.h) * out.w * out.c, 0.0f);
  for (int y = 0; y < out.h; ++y)
    for (int xx = 0; xx < out.w; ++xx)
      for (int c = 0; c < x.c; ++c) {
        float s = 0.0f;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) s += x.data[(static_cast<std::size_t>(2 * y + dy) * x.w + 2 * xx + dx) * x.c + c];
        out.data[(static_cast<std::size_t>(y) * out.w + xx) * out.c + c] = 0.25f * s;
      }
  return out;
}

// Mean over a k x k neighborhood with reflect-101 borders.
Act local_average(const Act& x, int k) {
  if (k <= 1) return x;
  const int r = k / 2;
  Act out{x.h, x.w, x.c, AlignedVector<float>(x.data.size(), 0.0f)};
  const float norm = 1.0f / static_cast<float>(k * k);
  for (int y = 0; y < x.h; ++y)
    for (int xx = 0; xx < x.w; ++xx) {
      float* dst = &out.data[(static_cast<std::size_t>(y) * x.w + xx) * x.c];
      for (int dy = -r; dy <= r; ++dy) {
        const int sy = reflect101(y + dy, x.h);
        for (int dx = -r; dx <= r; ++dx) {
          const int sx = reflect101(xx + dx, x.w);
          const float* src = &x.data[(static_cast<std::size_t>(sy) * x.w + sx) * x.c];
          for (int c = 0; c < x.c; ++c) dst[c] += src[c];
        }
      }
      for (int c = 0; c < x.c; ++c) dst[c] *= norm;
    }
  return out;
}

// Half-pixel bilinear resample of an activation grid.
Act bilinear(const Act& x, int h, int w) {
  if (x.h == h && x.w == w) return x;
  Act out{h, w, x.c, AlignedVector<float>(static_cast<std::size_t>(h) * w * x.c)};
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * x.h / h - 0.5, 0.0, static_cast<double>(x.h - 1));
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, x.h - 1);
    const float wy = static_cast<float>(fy - y0);
    for (int xx = 0; xx < w; ++xx) {
      const double fx = std::clamp((xx + 0.5) * x.w / w - 0.5, 0.0, static_cast<double>(x.w - 1));
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, x.w - 1);
      const float wx = static_cast<float>(fx - x0);
      for (int c = 0; c < x.c; ++c) {
        auto at = [&](int yy, int xq) { return x.data[(static_cast<std::size_t>(yy) * x.w + xq) * x.c + c]; };
        const float top = (1 - wx) * at(y0, x0) + wx * at(y0, x1);
        const float bot = (1 - wx) * at(y1, x0) + wx * at(y1, x1);
        out.data[(static_cast<std::size_t>(y) * w + xx) * x.c + c] = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

}  // namespace

Backbone::Backbone(const BackboneSpec& spec) : spec_(spec) {
  if (spec_.taps.empty()) throw ConfigError("backbone: taps must be nonempty");
  for (int t : spec_.taps) {
    if (t < 1 || t > 3) throw ConfigError("backbone: taps must be within {1,2,3}");
  }
  if (spec_.aggregation < 1 || spec_.aggregation % 2 == 0) throw ConfigError("backbone: aggregation must be odd");
  std::sort(spec_.taps.begin(), spec_.taps.end());
  spec_.taps.erase(std::unique(spec_.taps.begin(), spec_.taps.end()), spec_.taps.end());

  for (int l = 0; l < 3; ++l) {
    Conv c;
    c.in = kLevelChannels[l];
    c.out = kLevelChannels[l + 1];
    c.weight.resize(static_cast<std::size_t>(c.out) * c.in * 9);
    c.bias.assign(c.out, 0.0f);
    convs_.push_back(std::move(c));
  }

  if (spec_.kind == "random-conv") {
    for (std::size_t l = 0; l < convs_.size(); ++l) {
      Rng rng = make_rng(derive_seed(spec_.seed, "backbone.conv" + std::to_string(l)));
      const double std = std::sqrt(2.0 / (convs_[l].in * 9));
      for (auto& w : convs_[l].weight) w = static_cast<float>(std * standard_normal(rng));
    }
  } else if (spec_.kind == "imported") {
    if (spec_.weights.empty() || !fs::exists(spec_.weights)) {
      throw ConfigError("backbone: imported weights not found: " + spec_.weights.string());
    }
    const auto arrays = ad::read_checkpoint(spec_.weights);
    for (std::size_t l = 0; l < convs_.size(); ++l) {
      const std::string wname = "backbone.conv" + std::to_string(l) + ".weight";
      const std::string bname = "backbone.conv" + std::to_string(l) + ".bias";
      bool got_w = false;
      for (const auto& a : arrays) {
        if (a.name == wname) {
          if (a.values.size() != convs_[l].weight.size()) throw ConfigError("backbone: shape mismatch for " + wname);
          convs_[l].weight = a.values;
          got_w = true;
        } else if (a.name == bname) {
          if (a.values.size() != convs_[l].bias.size()) throw ConfigError("backbone: shape mismatch for " + bname);
          convs_[l].bias = a.values;
        }
      }
      if (!got_w) throw ConfigError("backbone: checkpoint lacks " + wname);
    }
  } else {
    throw ConfigError("backbone: unknown kind '" + spec_.kind + "'");
  }
}

int Backbone::channels() const {
  int c = 0;
  for (int t : spec_.taps) c += kLevelChannels[t];
  return c;
}

int Backbone::stride() const { return kLevelStride[spec_.taps.front()]; }

int Backbone::grid_size(int pixels) const {
  int n = pixels / 2 / 2;
  for (int l = 2; l <= spec_.taps.front(); ++l) n /= 2;
  return n;
}

FeatureMap Backbone::extract(const Image& img) const {
  if (img.channels != 3) throw ArgumentError("backbone: expects a 3-channel image");
  Act x{img.height, img.width, 3, AlignedVector<float>(img.data.begin(), img.data.end())};
  std::vector<Act> levels;
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    if (spec_.taps.back() <= static_cast<int>(l)) break;
    Act z = conv3x3(x, convs_[l].out, convs_[l].weight, convs_[l].bias);
    if (l == 0) {
      x = avgpool2(avgpool2(relu(std::move(z))));
      levels.push_back(x);
    } else {
      z = avgpool2(z);
      x = relu(z);
      levels.push_back(std::move(z));
    }
  }
  const Act& finest = levels[spec_.taps.front() - 1];
  const int gh = finest.h, gw = finest.w;
  FeatureMap out(gh, gw, channels());
  int offset = 0;
  for (int t : spec_.taps) {
    const Act agg = bilinear(local_average(levels[t - 1], spec_.aggregation), gh, gw);
    for (std::size_t p = 0; p < out.positions(); ++p) {
      std::memcpy(&out.data[p * out.channels + offset], &agg.data[p * agg.c], sizeof(float) * agg.c);
    }
    offset += agg.c;
  }
  return out;
}

std::uint64_t Backbone::weight_hash() const {
  std::uint64_t h = fnv1a64("backbone");
  for (const auto& c : convs_) {
    h = fnv1a64({reinterpret_cast<const char*>(c.weight.data()), c.weight.size() * sizeof(float)}, h);
    h = fnv1a64({reinterpret_cast<const char*>(c.bias.data()), c.bias.size() * sizeof(float)}, h);
  }
  return h;
}

std::vector<ad::NamedArray> Backbone::export_weights() const {
  std::vector<ad::NamedArray> out;
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    const auto& c = convs_[l];
    const std::string base = "backbone.conv" + std::to_string(l);
    out.push_back({base + ".weight",
                   {static_cast<std::uint32_t>(c.out), static_cast<std::uint32_t>(c.in), 3u, 3u}, c.weight});
    out.push_back({base + ".bias", {static_cast<std::uint32_t>(c.out)}, c.bias});
  }
  return out;
}

FeaturePair extract_pair(const Image& standardized, const Backbone& backbone) {
  const FrequencyPair bands = split_frequency(standardized);
  return {backbone.extract(bands.low), backbone.extract(bands.high)};
}

template <typename T>
FeatureAdaptor<T> FeatureAdaptor<T>::identity(int channels, bool with_bias) {
  const auto c = static_cast<std::size_t>(channels);
  std::vector<T> w(c * c, T(0));
  for (std::size_t i = 0; i < c; ++i) w[i * c + i] = T(1);
  FeatureAdaptor a;
  a.weight = ad::Parameter<T>("adaptor.weight", {c, c}, std::move(w));
  if (with_bias) a.bias = ad::Parameter<T>("adaptor.bias", {c}, std::vector<T>(c, T(0)));
  return a;
}

template <typename T>
ad::Tensor<T> FeatureAdaptor<T>::operator()(const ad::Tensor<T>& p) const {
  if (p.dim(-1) != weight.value.dim(1)) {
    throw ArgumentError("adaptor: feature width " + std::to_string(p.dim(-1)) + " != " +
                        std::to_string(weight.value.dim(1)));
  }
  return ad::linear(p, weight.value, bias ? bias->value : ad::Tensor<T>{});
}

template <typename T>
std::vector<ad::Parameter<T>*> FeatureAdaptor<T>::parameters() {
  std::vector<ad::Parameter<T>*> out{&weight};
  if (bias) out.push_back(&*bias);
  return out;
}

FeatureMap adapt(const FeatureMap& p, const FeatureAdaptor<float>& adaptor) {
  const auto q = adaptor(to_tensor<float>({&p}));
  FeatureMap out(p.grid_h, p.grid_w, adaptor.channels());
  std::copy(q.data().begin(), q.data().end(), out.data.begin());
  return out;
}

template <typename T>
ad::Tensor<T> to_tensor(const std::vector<const FeatureMap*>& maps, bool requires_grad) {
  if (maps.empty()) throw ArgumentError("to_tensor: empty batch");
  const auto& first = *maps.front();
  std::vector<T> data;
  data.reserve(maps.size() * first.data.size());
  for (const FeatureMap* m : maps) {
    if (m->grid_h != first.grid_h || m->grid_w != first.grid_w || m->channels != first.channels) {
      throw ArgumentError("to_tensor: feature maps differ in shape");
    }
    data.insert(data.end(), m->data.begin(), m->data.end());
  }
  ad::Shape shape{maps.size(), first.positions(), static_cast<std::size_t>(first.channels)};
  return requires_grad ? ad::Tensor<T>::leaf(std::move(shape), std::move(data))
                       : ad::Tensor<T>::constant(std::move(shape), std::move(data));
}

template struct FeatureAdaptor<float>;
template struct FeatureAdaptor<double>;
template ad::Tensor<float> to_tensor<float>(const std::vector<const FeatureMap*>&, bool);
template ad::Tensor<double> to_tensor<double>(const std::vector<const FeatureMap*>&, bool);

}  // namespace dfd
