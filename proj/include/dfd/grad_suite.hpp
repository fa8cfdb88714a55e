#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfd/autodiff/gradcheck.hpp"
#include "dfd/discriminators.hpp"

namespace dfd {

/// Finite-difference checks of every differentiable primitive, the adaptor,
/// both discriminators and each training loss, all in double precision.
struct GradSuiteOptions {
  int channels = 6;
  PerlinDiscriminatorShape perlin{6, 8, 2, 2, 2, 3};
  int batch = 2;
  double step = 1e-4;
  double tol = 1e-3;
  std::size_t max_coords = 0;  ///< per leaf; 0 probes every coordinate
  std::uint64_t seed = 0;
};

/// Full-size networks (192 channels, 8 x 8 grid) with sampled coordinates.
GradSuiteOptions default_net_suite(std::uint64_t seed = 0);

struct GradSuiteEntry {
  std::string name;
  ad::GradCheckReport report;
};

std::vector<GradSuiteEntry> run_grad_suite(const GradSuiteOptions& opts = {});

}  // namespace dfd
