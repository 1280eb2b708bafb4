#pragma once

#include "knudsen/velocity_grid.hpp"

#include <array>

namespace kn {

// Hard-sphere collision operator
//   B(F1,F2)(v) = int int |(v-u).w| [F1(u') F2(v') - F1(u) F2(v)] du dw
// evaluated in the sigma form, where for q = v - u
//   v' = (v+u)/2 + |q| s/2,  u' = (v+u)/2 - |q| s/2,
//   int |q.w| G dw = (|q|/2) int G(s) ds.
// Post-collision values are interpolated from the ratio F / M_ref (M_ref the
// standard Maxwellian) with a 3x3x3 Lagrange stencil; values beyond the
// velocity cutoff are dropped.
Vec bilinear_collision_raw(const VelocityGrid& g, const Vec& F1, const Vec& F2);

// Raw operator followed by the conservative correction that removes the
// (1, v, |v|^2) moments with an M_ref-weighted least-squares projection.
Vec bilinear_collision(const VelocityGrid& g, const Vec& F1, const Vec& F2);

// Subtract M_ref * (polynomial in {1, v, |v|^2}) so the five moments vanish.
void conservative_correction(const VelocityGrid& g, Vec& Q);

// nu(v) = 2 pi int |v - u| M(u) du by quadrature.
Vec collision_frequency(const VelocityGrid& g, const FluidState& s);
Vec collision_frequency(const VelocityGrid& g, const Vec& F);

struct BurnettFields {
  std::array<std::array<Vec, 3>, 3> A;
  std::array<Vec, 3> B;
};

BurnettFields burnett(const VelocityGrid& g, const FluidState& s);

// Standard Maxwellian values, used as interpolation ratio.
Vec reference_maxwellian(const VelocityGrid& g);

}  // namespace kn
