#include "dfd/autodiff/optim.hpp"

#include <cmath>

#include "dfd/error.hpp"

namespace dfd::ad {

template <typename T>
void adam_step(std::span<Parameter<T>* const> params, const AdamOptions& opt) {
  for (Parameter<T>* p : params) {
    if (!p->value.has_grad()) throw StateError("adam_step: parameter '" + p->name + "' has no gradient");
  }
  for (Parameter<T>* p : params) {
    const std::size_t n = p->value.numel();
    if (p->first_moment.size() != n) {
      p->first_moment.assign(n, T(0));
      p->second_moment.assign(n, T(0));
    }
    ++p->step;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(p->step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(p->step));
    auto w = p->value.mutable_data();
    const auto g = p->value.grad();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[i];
      const double m = opt.beta1 * p->first_moment[i] + (1.0 - opt.beta1) * gi;
      const double v = opt.beta2 * p->second_moment[i] + (1.0 - opt.beta2) * gi * gi;
      p->first_moment[i] = static_cast<T>(m);
      p->second_moment[i] = static_cast<T>(v);
      const double m_hat = m / c1;
      const double v_hat = v / c2;
      w[i] = static_cast<T>(w[i] - opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps));
    }
    p->value.clear_grad();
  }
}

template void adam_step<float>(std::span<Parameter<float>* const>, const AdamOptions&);
template void adam_step<double>(std::span<Parameter<double>* const>, const AdamOptions&);

}  // namespace dfd::ad
