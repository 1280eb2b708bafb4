#pragma once

#include "knudsen/linearized.hpp"

#include <memory>

// 8^3 grid on [-5, 5]^3 shared by the tests that need a kernel.
inline const kn::VelocityGrid& small_grid() {
  static const kn::VelocityGrid g = kn::build_grid(8, 5.0, 32);
  return g;
}

inline std::shared_ptr<const kn::LinearizedKernel> small_kernel() {
  static const auto K = std::make_shared<const kn::LinearizedKernel>(kn::LinearizedKernel::assemble(small_grid()));
  return K;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }
