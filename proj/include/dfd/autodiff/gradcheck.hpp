#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dfd/autodiff/tensor.hpp"

namespace dfd::ad {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  ///< "<input>#<index>" of the worst coordinate
  bool passed = false;
};

/// Denominator floor of the relative error |analytic - numeric| /
/// max(|analytic|, |numeric|, floor); keeps near-zero gradients from
/// producing meaningless ratios.
inline constexpr double kGradCheckFloor = 1e-3;

/// Central-difference check of a scalar function of several leaf tensors.
/// `f` must rebuild its graph on every call; leaves are perturbed in place.
/// With `max_coords` > 0, at most that many evenly strided coordinates of
/// each leaf are probed (the analytic gradient is still computed in full).
GradCheckReport grad_check(const std::function<Tensor<double>()>& f, std::vector<Tensor<double>> leaves,
                           double step = 1e-4, double tol = 1e-4, std::size_t max_coords = 0);

/// Single-input form: f(x) with x a fresh leaf holding `x0`.
GradCheckReport grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f, Shape shape,
                           std::vector<double> x0, double step = 1e-4, double tol = 1e-4);

}  // namespace dfd::ad
