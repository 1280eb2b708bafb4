#include "knudsen/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kn {

GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  if (n % 2 == 1) r.x[n / 2] = 0.0;
  return r;
}

std::vector<double> fd_derivative(const std::vector<double>& f, double dx) {
  const int n = static_cast<int>(f.size());
  if (n < 5) throw std::invalid_argument("fd_derivative: need at least 5 points");
  std::vector<double> d(n);
  for (int i = 2; i < n - 2; ++i)
    d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * dx);
  // third-order one-sided closures
  d[0] = (-11.0 * f[0] + 18.0 * f[1] - 9.0 * f[2] + 2.0 * f[3]) / (6.0 * dx);
  d[1] = (-2.0 * f[0] - 3.0 * f[1] + 6.0 * f[2] - f[3]) / (6.0 * dx);
  d[n - 1] = (11.0 * f[n - 1] - 18.0 * f[n - 2] + 9.0 * f[n - 3] - 2.0 * f[n - 4]) / (6.0 * dx);
  d[n - 2] = (2.0 * f[n - 1] + 3.0 * f[n - 2] - 6.0 * f[n - 3] + f[n - 4]) / (6.0 * dx);
  return d;
}

FdStencil fd_stencil(int i, int n) {
  if (n < 5 || i < 0 || i >= n) throw std::invalid_argument("fd_stencil: bad index");
  FdStencil s;
  auto set = [&](int start, std::initializer_list<double> c, double div) {
    s.start = start;
    s.len = static_cast<int>(c.size());
    int k = 0;
    for (double v : c) s.c[k++] = v / div;
  };
  if (i == 0)
    set(0, {-11.0, 18.0, -9.0, 2.0}, 6.0);
  else if (i == 1)
    set(0, {-2.0, -3.0, 6.0, -1.0}, 6.0);
  else if (i == n - 1)
    set(n - 4, {-2.0, 9.0, -18.0, 11.0}, 6.0);
  else if (i == n - 2)
    set(n - 4, {1.0, -6.0, 3.0, 2.0}, 6.0);
  else
    set(i - 2, {1.0, -8.0, 0.0, 8.0, -1.0}, 12.0);
  return s;
}

std::vector<std::vector<double>> fd_weights(double z, const std::vector<double>& xs, int m) {
  const int n = static_cast<int>(xs.size());
  if (n < 1 || m < 0) throw std::invalid_argument("fd_weights: bad arguments");
  std::vector<std::vector<double>> c(m + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0, c4 = xs[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = xs[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

InterpStencil lagrange_stencil(const std::vector<double>& nodes, double z, int npts) {
  const int n = static_cast<int>(nodes.size());
  if (n == 0) throw std::invalid_argument("lagrange_stencil: no nodes");
  npts = std::min(npts, n);
  const int i = static_cast<int>(std::upper_bound(nodes.begin(), nodes.end(), z) - nodes.begin());
  InterpStencil s;
  s.start = std::clamp(i - npts / 2, 0, n - npts);
  std::vector<double> sub(nodes.begin() + s.start, nodes.begin() + s.start + npts);
  s.w = fd_weights(z, sub, 0)[0];
  return s;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: bad sizes");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw std::invalid_argument("loglog_slope: non-positive value");
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace kn
