#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dfd/autodiff/tensor.hpp"

namespace dfd::ad {

/// Trainable leaf tensor plus its Adam moment buffers.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::int64_t step = 0;

  Parameter() = default;
  Parameter(std::string n, Shape shape, std::vector<T> init)
      : name(std::move(n)), value(Tensor<T>::leaf(std::move(shape), std::move(init))) {}

  /// Fresh parameter of another precision holding the same values.
  template <typename U>
  Parameter<U> cast() const {
    std::vector<U> v(value.data().begin(), value.data().end());
    return Parameter<U>(name, value.shape(), std::move(v));
  }
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over `params`, then clears their gradients.
/// Throws StateError when a parameter has no gradient.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, const AdamOptions& opt);

extern template void adam_step<float>(std::span<Parameter<float>* const>, const AdamOptions&);
extern template void adam_step<double>(std::span<Parameter<double>* const>, const AdamOptions&);

}  // namespace dfd::ad
