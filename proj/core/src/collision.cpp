#include "knudsen/collision.hpp"

#include "knudsen/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kn {

Vec reference_maxwellian(const VelocityGrid& g) { return maxwellian(g, FluidState{}); }

namespace {

struct Stencil {
  int base;
  double w[3];
};

// t is a position in index units (node i sits at t = i). Returns false when
// the point lies outside the truncated cube.
inline bool make_stencil(double t, int n, Stencil& s) {
  if (t < -0.5 || t > n - 0.5) return false;
  int b = static_cast<int>(std::floor(t + 0.5)) - 1;
  if (b < 0) b = 0;
  if (b > n - 3) b = n - 3;
  auto w = quad_weights(t - b);
  s.base = b;
  s.w[0] = w[0];
  s.w[1] = w[1];
  s.w[2] = w[2];
  return true;
}

inline double interp(const double* phi, int n, const Stencil& a, const Stencil& b, const Stencil& c) {
  double acc = 0.0;
  for (int p = 0; p < 3; ++p) {
    const double* row = phi + (a.base + p) * n * n;
    double accq = 0.0;
    for (int q = 0; q < 3; ++q) {
      const double* col = row + (b.base + q) * n + c.base;
      accq += b.w[q] * (c.w[0] * col[0] + c.w[1] * col[1] + c.w[2] * col[2]);
    }
    acc += a.w[p] * accq;
  }
  return acc;
}

}  // namespace

Vec bilinear_collision_raw(const VelocityGrid& g, const Vec& F1, const Vec& F2) {
  const int N = g.size(), n = g.n;
  if (F1.size() != N || F2.size() != N) throw std::invalid_argument("bilinear_collision: mismatched grids");
  const Vec r = reference_maxwellian(g);
  const Vec phi1 = F1.cwiseQuotient(r);
  const Vec phi2 = F2.cwiseQuotient(r);
  const bool same = (F1.data() == F2.data()) || F1 == F2;

  // with identical arguments the integrand is even under s -> -s and the
  // antipodal half of the sphere suffices
  std::vector<Vec3> sn;
  std::vector<double> sw;
  if (same) {
    const int ns = static_cast<int>(g.sphere_nodes.size());
    std::vector<char> used(ns, 0);
    for (int a = 0; a < ns; ++a) {
      if (used[a]) continue;
      int partner = -1;
      for (int b = 0; b < ns; ++b)
        if (b != a && (g.sphere_nodes[a] + g.sphere_nodes[b]).norm() < 1e-12) partner = b;
      if (partner < 0) throw std::logic_error("sphere rule is not antipodal");
      used[a] = used[partner] = 1;
      sn.push_back(g.sphere_nodes[a]);
      sw.push_back(2.0 * g.sphere_weights[a]);
    }
  } else {
    sn = g.sphere_nodes;
    sw = g.sphere_weights;
  }
  const int ns = static_cast<int>(sn.size());

  // The gain integrand depends on the pair only through the midpoint and
  // |v - u|, so it is symmetric in (v, u): each unordered pair is visited once.
  // Stencils depend on one axis at a time and are tabulated per offset.
  Vec gain = Vec::Zero(N);
  std::vector<double> acc(N);
  std::vector<Stencil> sp[3], sm[3];
  std::vector<char> ok[3];
  for (int a = 0; a < 3; ++a) {
    sp[a].resize(n);
    sm[a].resize(n);
    ok[a].resize(n);
  }
  for (int dx = -(n - 1); dx <= n - 1; ++dx)
    for (int dy = -(n - 1); dy <= n - 1; ++dy)
      for (int dz = -(n - 1); dz <= n - 1; ++dz) {
        // one representative of each +-d pair, skip d = 0
        if (dx < 0 || (dx == 0 && (dy < 0 || (dy == 0 && dz <= 0)))) continue;
        const int d[3] = {dx, dy, dz};
        int lo[3], hi[3];
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::max(0, -d[a]);
          hi[a] = n - 1 - std::max(0, d[a]);
        }
        const int d2 = dx * dx + dy * dy + dz * dz;
        const double half = 0.5 * std::sqrt(static_cast<double>(d2));
        const int cnt = (hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1);
        std::fill(acc.begin(), acc.begin() + cnt, 0.0);
        for (int s = 0; s < ns; ++s) {
          for (int a = 0; a < 3; ++a) {
            const double o = half * sn[s][a];
            for (int j = lo[a]; j <= hi[a]; ++j) {
              const double c = j + 0.5 * d[a];
              ok[a][j] = make_stencil(c + o, n, sp[a][j]) && make_stencil(c - o, n, sm[a][j]);
            }
          }
          int p = 0;
          for (int i = lo[0]; i <= hi[0]; ++i)
            for (int j = lo[1]; j <= hi[1]; ++j)
              for (int l = lo[2]; l <= hi[2]; ++l, ++p) {
                if (!ok[0][i] || !ok[1][j] || !ok[2][l]) continue;
                acc[p] += sw[s] * interp(phi2.data(), n, sp[0][i], sp[1][j], sp[2][l]) *
                          interp(phi1.data(), n, sm[0][i], sm[1][j], sm[2][l]);
              }
        }
        const double q2 = 0.5 * g.h * std::sqrt(static_cast<double>(d2));
        int p = 0;
        for (int i = lo[0]; i <= hi[0]; ++i)
          for (int j = lo[1]; j <= hi[1]; ++j)
            for (int l = lo[2]; l <= hi[2]; ++l, ++p) {
              if (acc[p] == 0.0) continue;
              const int u = g.index(i, j, l);
              const int v = g.index(i + dx, j + dy, l + dz);
              gain[v] += q2 * r[u] * acc[p];
              gain[u] += q2 * r[v] * acc[p];
            }
      }

  const Vec nu = collision_frequency(g, F1);
  Vec Q(N);
  for (int k = 0; k < N; ++k) Q[k] = g.w * r[k] * gain[k] - F2[k] * nu[k];
  return Q;
}

void conservative_correction(const VelocityGrid& g, Vec& Q) {
  const Vec r = reference_maxwellian(g);
  Eigen::Matrix<double, 5, 5> A = Eigen::Matrix<double, 5, 5>::Zero();
  Eigen::Matrix<double, 5, 1> b = Eigen::Matrix<double, 5, 1>::Zero();
  for (int k = 0; k < g.size(); ++k) {
    double phi[5] = {1.0, g.vx[k], g.vy[k], g.vz[k],
                     g.vx[k] * g.vx[k] + g.vy[k] * g.vy[k] + g.vz[k] * g.vz[k]};
    for (int a = 0; a < 5; ++a) {
      b[a] += phi[a] * Q[k];
      for (int c = 0; c < 5; ++c) A(a, c) += phi[a] * phi[c] * r[k];
    }
  }
  Eigen::Matrix<double, 5, 1> lam = A.ldlt().solve(b);
  for (int k = 0; k < g.size(); ++k) {
    double phi[5] = {1.0, g.vx[k], g.vy[k], g.vz[k],
                     g.vx[k] * g.vx[k] + g.vy[k] * g.vy[k] + g.vz[k] * g.vz[k]};
    double c = 0.0;
    for (int a = 0; a < 5; ++a) c += lam[a] * phi[a];
    Q[k] -= r[k] * c;
  }
}

Vec bilinear_collision(const VelocityGrid& g, const Vec& F1, const Vec& F2) {
  Vec Q = bilinear_collision_raw(g, F1, F2);
  conservative_correction(g, Q);
  return Q;
}

Vec collision_frequency(const VelocityGrid& g, const Vec& F) {
  const int N = g.size();
  if (F.size() != N) throw std::invalid_argument("collision_frequency: size mismatch");
  Vec nu = Vec::Zero(N);
  for (int k = 0; k < N; ++k) {
    double s = 0.0;
    const double x = g.vx[k], y = g.vy[k], z = g.vz[k];
    for (int j = 0; j < N; ++j) {
      double dx = x - g.vx[j], dy = y - g.vy[j], dz = z - g.vz[j];
      s += std::sqrt(dx * dx + dy * dy + dz * dz) * F[j];
    }
    nu[k] = 2.0 * std::numbers::pi * g.w * s;
  }
  return nu;
}

Vec collision_frequency(const VelocityGrid& g, const FluidState& s) {
  return collision_frequency(g, maxwellian(g, s));
}

BurnettFields burnett(const VelocityGrid& g, const FluidState& s) {
  s.validate();
  const int N = g.size();
  Vec sq = sqrt_maxwellian(g, s);
  BurnettFields b;
  for (int i = 0; i < 3; ++i) {
    b.B[i].resize(N);
    for (int j = 0; j < 3; ++j) b.A[i][j].resize(N);
  }
  const double sT = std::sqrt(s.T);
  for (int k = 0; k < N; ++k) {
    Vec3 c = g.node(k) - s.u;
    double c2 = c.squaredNorm();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j)
        b.A[i][j][k] = (c[i] * c[j] / s.T - (i == j ? c2 / (3.0 * s.T) : 0.0)) * sq[k];
      b.B[i][k] = c[i] / (2.0 * sT) * (c2 / s.T - 5.0) * sq[k];
    }
  }
  return b;
}

}  // namespace kn
