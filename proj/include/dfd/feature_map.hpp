#pragma once

#include <cstddef>
#include <vector>

namespace dfd {

/// h x w grid of C-dimensional patch features, position-major
/// (data[(y * grid_w + x) * channels + c]).
struct FeatureMap {
  int grid_h = 0;
  int grid_w = 0;
  int channels = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(int h, int w, int c) : grid_h(h), grid_w(w), channels(c),
      data(static_cast<std::size_t>(h) * w * c, 0.0f) {}

  std::size_t positions() const { return static_cast<std::size_t>(grid_h) * grid_w; }
  float* at(int y, int x) { return &data[(static_cast<std::size_t>(y) * grid_w + x) * channels]; }
  const float* at(int y, int x) const {
    return &data[(static_cast<std::size_t>(y) * grid_w + x) * channels];
  }
};

}  // namespace dfd
