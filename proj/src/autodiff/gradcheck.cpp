#include "dfd/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dfd/error.hpp"

namespace dfd::ad {

GradCheckReport grad_check(const std::function<Tensor<double>()>& f, std::vector<Tensor<double>> leaves,
                           double step, double tol, std::size_t max_coords) {
  for (auto& leaf : leaves) {
    if (!leaf.requires_grad()) throw ArgumentError("grad_check: inputs must be leaves requiring grad");
    leaf.clear_grad();
  }
  backward(f());
  std::vector<std::vector<double>> analytic;
  for (auto& leaf : leaves) {
    if (leaf.has_grad()) {
      analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
    } else {
      analytic.emplace_back(leaf.numel(), 0.0);
    }
    leaf.clear_grad();
  }

  GradCheckReport report;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto data = leaves[li].mutable_data();
    const std::size_t n = data.size();
    const std::size_t probes = max_coords > 0 ? std::min(max_coords, n) : n;
    for (std::size_t k = 0; k < probes; ++k) {
      const std::size_t i = probes == n ? k : k * n / probes;
      const double saved = data[i];
      data[i] = saved + step;
      const double up = f().item();
      data[i] = saved - step;
      const double down = f().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[li][i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      ++report.coordinates;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (report.worst.empty() || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = std::to_string(li) + "#" + std::to_string(i);
      }
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f, Shape shape,
                           std::vector<double> x0, double step, double tol) {
  auto x = Tensor<double>::leaf(std::move(shape), std::move(x0));
  return grad_check([&] { return f(x); }, {x}, step, tol);
}

}  // namespace dfd::ad
