#pragma once

#include <array>
#include <vector>

namespace kn {

struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
};

// n-point Gauss-Legendre rule on [-1, 1].
GaussRule gauss_legendre(int n);

// Three-point Lagrange stencil for interpolation at fractional position t
// measured in grid spacings from the first stencil node (t in [0,2] is
// interpolation, outside is extrapolation).
inline std::array<double, 3> quad_weights(double t) {
  return {0.5 * (t - 1.0) * (t - 2.0), -t * (t - 2.0), 0.5 * t * (t - 1.0)};
}

// Fourth-order finite-difference first derivative on a uniform grid, with
// one-sided third-order closures at both ends.
std::vector<double> fd_derivative(const std::vector<double>& f, double dx);

// Stencil of fd_derivative at index i of n points: derivative is
// sum_k c[k] f[start + k] / dx.
struct FdStencil {
  int start = 0;
  int len = 0;
  double c[5] = {0, 0, 0, 0, 0};
};
FdStencil fd_stencil(int i, int n);

// Finite-difference weights (Fornberg) at z for derivatives 0..m from the
// nodes xs; result[d][j] multiplies f(xs[j]) in the d-th derivative.
std::vector<std::vector<double>> fd_weights(double z, const std::vector<double>& xs, int m);

// Lagrange interpolation weights at z from npts consecutive nodes (ascending)
// chosen around z; start is the first node used.
struct InterpStencil {
  int start = 0;
  std::vector<double> w;
};
InterpStencil lagrange_stencil(const std::vector<double>& nodes, double z, int npts);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace kn
