#include "knudsen/velocity_grid.hpp"

#include "knudsen/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace kn {

void FluidState::validate() const {
  if (!(rho > 0.0) || !(T > 0.0) || !u.allFinite())
    throw std::invalid_argument("FluidState: need rho > 0 and T > 0 (rho=" + std::to_string(rho) +
                                ", T=" + std::to_string(T) + ")");
}

int VelocityGrid::mirror(int k) const {
  int l = k % n, j = (k / n) % n, i = k / (n * n);
  return index(n - 1 - i, n - 1 - j, n - 1 - l);
}

int VelocityGrid::reflect3(int k) const {
  int l = k % n, j = (k / n) % n, i = k / (n * n);
  return index(i, j, n - 1 - l);
}

VelocityGrid build_grid(int n_per_axis, double v_max, int n_sphere) {
  if (n_per_axis < 2 || n_per_axis % 2 != 0)
    throw std::invalid_argument("build_grid: n_per_axis must be even and >= 2");
  if (!(v_max > 0.0)) throw std::invalid_argument("build_grid: v_max must be positive");
  if (n_sphere < 2) throw std::invalid_argument("build_grid: n_sphere must be >= 2");

  int polar = 1;
  for (int p = 1; p * p <= n_sphere / 2; ++p)
    if (n_sphere % p == 0 && (n_sphere / p) % 2 == 0) polar = p;
  const int azim = n_sphere / polar;
  if (polar * azim != n_sphere || azim % 2 != 0)
    throw std::invalid_argument("build_grid: n_sphere must factor as polar x even azimuth");

  VelocityGrid g;
  g.n = n_per_axis;
  g.vmax = v_max;
  g.h = 2.0 * v_max / n_per_axis;
  g.w = g.h * g.h * g.h;
  g.n_sphere = n_sphere;
  g.axis.resize(g.n);
  for (int i = 0; i < g.n; ++i) g.axis[i] = -v_max + (i + 0.5) * g.h;
  // exact antisymmetry of the node set
  for (int i = 0; i < g.n / 2; ++i) g.axis[g.n - 1 - i] = -g.axis[i];

  const int N = g.size();
  g.vx.resize(N);
  g.vy.resize(N);
  g.vz.resize(N);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j)
      for (int l = 0; l < g.n; ++l) {
        int k = g.index(i, j, l);
        g.vx[k] = g.axis[i];
        g.vy[k] = g.axis[j];
        g.vz[k] = g.axis[l];
      }

  GaussRule gl = gauss_legendre(polar);
  for (int a = 0; a < polar; ++a) {
    double ct = gl.x[a], st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (int b = 0; b < azim; ++b) {
      double ph = 2.0 * std::numbers::pi * (b + 0.5) / azim;
      g.sphere_nodes.push_back({st * std::cos(ph), st * std::sin(ph), ct});
      g.sphere_weights.push_back(gl.w[a] * 2.0 * std::numbers::pi / azim);
    }
  }
  return g;
}

double maxwellian_at(const Vec3& v, const FluidState& s) {
  return s.rho * std::pow(2.0 * std::numbers::pi * s.T, -1.5) *
         std::exp(-(v - s.u).squaredNorm() / (2.0 * s.T));
}

Vec maxwellian(const VelocityGrid& g, const FluidState& s) {
  s.validate();
  Vec M(g.size());
  const double c = s.rho * std::pow(2.0 * std::numbers::pi * s.T, -1.5);
  for (int k = 0; k < g.size(); ++k) {
    double dx = g.vx[k] - s.u[0], dy = g.vy[k] - s.u[1], dz = g.vz[k] - s.u[2];
    M[k] = c * std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * s.T));
  }
  return M;
}

Vec sqrt_maxwellian(const VelocityGrid& g, const FluidState& s) {
  return maxwellian(g, s).cwiseSqrt();
}

double Weight::operator()(const Vec3& v) const {
  switch (kind) {
    case Kind::One: return 1.0;
    case Kind::V: return v[component];
    case Kind::V2: return v.squaredNorm();
    case Kind::Rel: return v[component] - u[component];
    case Kind::Rel2: return (v - u).squaredNorm();
    case Kind::User:
      if (!poly) throw std::invalid_argument("moment: empty user polynomial");
      return poly(v);
  }
  throw std::invalid_argument("moment: unsupported weight specifier");
}

double moment(const VelocityGrid& g, const Vec& F, const Weight& phi) {
  if (F.size() != g.size()) throw std::invalid_argument("moment: size mismatch");
  if (phi.kind != Weight::Kind::One && phi.kind != Weight::Kind::V2 && phi.kind != Weight::Kind::Rel2 &&
      phi.kind != Weight::Kind::User && (phi.component < 0 || phi.component > 2))
    throw std::invalid_argument("moment: component out of range");
  double s = 0.0;
  for (int k = 0; k < g.size(); ++k) s += phi(g.node(k)) * F[k];
  return s * g.w;
}

Eigen::Matrix<double, 5, 1> conserved_moments(const VelocityGrid& g, const Vec& F) {
  Eigen::Matrix<double, 5, 1> m = Eigen::Matrix<double, 5, 1>::Zero();
  for (int k = 0; k < g.size(); ++k) {
    double f = F[k];
    m[0] += f;
    m[1] += g.vx[k] * f;
    m[2] += g.vy[k] * f;
    m[3] += g.vz[k] * f;
    m[4] += 0.5 * (g.vx[k] * g.vx[k] + g.vy[k] * g.vy[k] + g.vz[k] * g.vz[k]) * f;
  }
  return m * g.w;
}

FluidState match_moments(const VelocityGrid& g, const Eigen::Matrix<double, 5, 1>& m,
                         const FluidState* guess) {
  FluidState s;
  if (guess) {
    s = *guess;
  } else {
    if (!(m[0] > 0.0)) throw std::invalid_argument("match_moments: non-positive mass");
    s.rho = m[0];
    s.u = m.segment<3>(1) / m[0];
    s.T = (2.0 * m[4] / m[0] - s.u.squaredNorm()) / 3.0;
  }
  s.validate();
  using V5 = Eigen::Matrix<double, 5, 1>;
  using M5 = Eigen::Matrix<double, 5, 5>;
  for (int it = 0; it < 30; ++it) {
    Vec M = maxwellian(g, s);
    V5 r = conserved_moments(g, M) - m;
    // Jacobian of moments with respect to (rho, u, T)
    M5 J = M5::Zero();
    for (int k = 0; k < g.size(); ++k) {
      Vec3 v = g.node(k);
      Vec3 c = v - s.u;
      double c2 = c.squaredNorm();
      double phi[5] = {1.0, v[0], v[1], v[2], 0.5 * v.squaredNorm()};
      double d[5] = {M[k] / s.rho, M[k] * c[0] / s.T, M[k] * c[1] / s.T, M[k] * c[2] / s.T,
                     M[k] * (c2 / (2.0 * s.T * s.T) - 1.5 / s.T)};
      for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) J(a, b) += phi[a] * d[b];
    }
    J *= g.w;
    V5 dx = J.partialPivLu().solve(r);
    s.rho -= dx[0];
    s.u -= dx.segment<3>(1);
    s.T -= dx[4];
    s.validate();
    if (dx.cwiseAbs().maxCoeff() < 1e-15 * (1.0 + s.rho + s.T + s.u.norm())) break;
  }
  return s;
}

Mat null_basis(const VelocityGrid& g, const FluidState& s) {
  s.validate();
  Vec sq = sqrt_maxwellian(g, s);
  Mat E(g.size(), 5);
  for (int k = 0; k < g.size(); ++k) {
    Vec3 c = g.node(k) - s.u;
    E(k, 0) = sq[k] / std::sqrt(s.rho);
    for (int i = 0; i < 3; ++i) E(k, 1 + i) = c[i] / std::sqrt(s.rho * s.T) * sq[k];
    E(k, 4) = (c.squaredNorm() / s.T - 3.0) / std::sqrt(6.0 * s.rho) * sq[k];
  }
  return E;
}

NullSpace::NullSpace(const VelocityGrid& g, const FluidState& s) : E_(null_basis(g, s)) {
  Eigen::Matrix<double, 5, 5> G = E_.transpose() * E_;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>> es(G);
  if (!(es.eigenvalues()[0] > 1e-12 * es.eigenvalues()[4]))
    throw std::runtime_error("NullSpace: singular Gram matrix (degenerate velocity grid)");
  // Q = E G^{-1/2} is orthonormal and spans the same space
  Eigen::Matrix<double, 5, 5> Gih =
      es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
      es.eigenvectors().transpose();
  Q_ = E_ * Gih;
}

Vec NullSpace::project(const Vec& f) const { return Q_ * (Q_.transpose() * f); }

void NullSpace::project_columns(Mat& F) const { F = Q_ * (Q_.transpose() * F); }

void NullSpace::complement_columns(Mat& F) const { F -= Q_ * (Q_.transpose() * F); }

}  // namespace kn
