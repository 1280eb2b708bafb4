#include "knudsen/interior_expansion.hpp"

#include "knudsen/knudsen_layer.hpp"
#include "knudsen/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace kn {

namespace {

constexpr double kGamma = 5.0 / 3.0;

struct Prim {
  double r, u[3], T;
};

Prim prim(const Conserved& U) {
  Prim p;
  p.r = U[0];
  for (int i = 0; i < 3; ++i) p.u[i] = U[1 + i] / p.r;
  p.T = (U[4] / p.r - 0.5 * (p.u[0] * p.u[0] + p.u[1] * p.u[1] + p.u[2] * p.u[2])) / 1.5;
  return p;
}

// perturbation (rho1, u1, dT)
struct Pert {
  double r, u[3], dT;
};

Pert pert_of(const Prim& b, const Conserved& U1) {
  Pert q;
  q.r = U1[0];
  double udot = 0.0;
  for (int i = 0; i < 3; ++i) {
    q.u[i] = (U1[1 + i] - q.r * b.u[i]) / b.r;
    udot += b.u[i] * q.u[i];
  }
  const double u2 = b.u[0] * b.u[0] + b.u[1] * b.u[1] + b.u[2] * b.u[2];
  q.dT = (U1[4] - q.r * (0.5 * u2 + 1.5 * b.T) - b.r * udot) / (1.5 * b.r);
  return q;
}

Conserved cons_of(const Prim& b, const Pert& q) {
  Conserved U1;
  U1[0] = q.r;
  double udot = 0.0;
  for (int i = 0; i < 3; ++i) {
    U1[1 + i] = q.r * b.u[i] + b.r * q.u[i];
    udot += b.u[i] * q.u[i];
  }
  const double u2 = b.u[0] * b.u[0] + b.u[1] * b.u[1] + b.u[2] * b.u[2];
  U1[4] = q.r * (0.5 * u2 + 1.5 * b.T) + b.r * (udot + 1.5 * q.dT);
  return U1;
}

// derivative of the Euler flux along the perturbation
Conserved lin_flux(const Prim& b, const Conserved& U1) {
  const Pert q = pert_of(b, U1);
  const double p1 = q.r * b.T + b.r * q.dT;
  const double u2 = b.u[0] * b.u[0] + b.u[1] * b.u[1] + b.u[2] * b.u[2];
  const double E = b.r * (0.5 * u2 + 1.5 * b.T), p = b.r * b.T;
  Conserved F;
  F[0] = q.r * b.u[2] + b.r * q.u[2];
  for (int i = 0; i < 3; ++i) F[1 + i] = U1[1 + i] * b.u[2] + b.r * b.u[i] * q.u[2] + (i == 2 ? p1 : 0.0);
  F[4] = (U1[4] + p1) * b.u[2] + (E + p) * q.u[2];
  return F;
}

double wave_speed(const Prim& b) { return std::abs(b.u[2]) + std::sqrt(kGamma * std::max(b.T, 0.0)); }

double bump(double x) { return std::exp(-(x - 1.0) * (x - 1.0) / 0.1) + std::exp(-(x + 1.0) * (x + 1.0) / 0.1); }

// kinetic-part right-hand side and full transport at one point
void point_fields(const VelocityGrid& g, const EulerPoint& p, double* h, double* full) {
  const FluidState& s = p.s;
  const double T = s.T, sT = std::sqrt(T);
  const double pref = s.rho / std::pow(2.0 * M_PI * T, 1.5);
  for (int k = 0; k < g.size(); ++k) {
    const Vec3 c = g.node(k) - s.u;
    const double c2 = c.squaredNorm();
    const double sq = std::sqrt(pref * std::exp(-c2 / (2.0 * T)));
    if (h) {
      double a = 0.0;
      for (int i = 0; i < 3; ++i) a += (c[i] * c[2] / T - (i == 2 ? c2 / (3.0 * T) : 0.0)) * p.du[i];
      const double b = c[2] / (2.0 * sT) * (c2 / T - 5.0);
      h[k] = (a + b * p.dT / sT) * sq;
    }
    if (full) {
      const double e = c2 / (2.0 * T * T) - 1.5 / T;
      const double lt = p.drho_dt / s.rho + c.dot(p.du_dt) / T + e * p.dT_dt;
      const double lx = p.drho / s.rho + c.dot(p.du) / T + e * p.dT;
      full[k] = (lt + g.vz[k] * lx) * sq;
    }
  }
}

double column_norm(const VelocityGrid& g, const Vec& v) { return std::sqrt(g.w * v.squaredNorm()); }

Mat sqrt_cols(const Mat& M) { return M.cwiseMax(0.0).cwiseSqrt(); }

// solves L_s f = h for the nonzero columns only
Mat solve_columns(const LinearizedKernel& K, const VelocityGrid& g, const std::vector<FluidState>& states,
                  const Mat& H, const PinvOptions& opt) {
  Mat X = Mat::Zero(H.rows(), H.cols());
  // columns at roundoff level relative to the largest are treated as zero
  const double floor = 1e-13 * (H.size() > 0 ? H.cwiseAbs().maxCoeff() : 0.0);
  std::vector<int> idx;
  for (int c = 0; c < H.cols(); ++c)
    if (H.col(c).cwiseAbs().maxCoeff() > floor) idx.push_back(c);
  if (idx.empty()) return X;
  std::vector<StateMap> maps;
  maps.reserve(idx.size());
  Mat Hs(H.rows(), static_cast<int>(idx.size()));
  for (size_t i = 0; i < idx.size(); ++i) {
    maps.emplace_back(g, states[idx[i]]);
    Hs.col(i) = H.col(idx[i]);
  }
  Mat Xs = pseudo_inverse_L(K, g, maps, Hs, opt);
  for (size_t i = 0; i < idx.size(); ++i) X.col(idx[i]) = Xs.col(i);
  return X;
}

}  // namespace

CorrectionField zero_correction(const EulerField& like) {
  CorrectionField c;
  c.t = like.t;
  c.x = like.x;
  const size_t n = like.x.size();
  c.rho1.assign(n, 0.0);
  c.u1_1.assign(n, 0.0);
  c.u1_2.assign(n, 0.0);
  c.u1_3.assign(n, 0.0);
  c.theta1.assign(n, 0.0);
  return c;
}

CorrectionField correction_profile(const std::string& id, double amplitude, const EulerField& like) {
  CorrectionField c = zero_correction(like);
  if (id == "zero") return c;
  if (id == "gauss-velocity") {
    for (int i = 0; i < c.nx(); ++i) c.u1_1[i] = amplitude * bump(c.x[i]);
    return c;
  }
  throw std::invalid_argument("unknown correction profile: " + id);
}

CorrectionField sample_correction(const CorrectionField& c, const std::vector<double>& xs, double u3_wall) {
  CorrectionField o;
  o.t = c.t;
  o.x = xs;
  o.rho1 = interpolate_cells(c.x, c.rho1, 1, xs);
  o.u1_1 = interpolate_cells(c.x, c.u1_1, 1, xs);
  o.u1_2 = interpolate_cells(c.x, c.u1_2, 1, xs);
  std::vector<double> shifted(c.u1_3);
  for (double& v : shifted) v -= u3_wall;
  o.u1_3 = interpolate_cells(c.x, shifted, -1, xs);
  for (double& v : o.u1_3) v += u3_wall;
  o.theta1 = interpolate_cells(c.x, c.theta1, 1, xs);
  return o;
}

std::vector<double> slab_nodes(int nx, double xmax) {
  if (nx < 8 || !(xmax > 0.0)) throw std::invalid_argument("slab_nodes: bad grid");
  std::vector<double> x(nx + 1);
  for (int j = 0; j <= nx; ++j) x[j] = xmax * j / nx;
  return x;
}

Mat maxwellian_transport(const VelocityGrid& g, const std::vector<EulerPoint>& pts) {
  Mat out(g.size(), static_cast<int>(pts.size()));
  for (size_t q = 0; q < pts.size(); ++q) point_fields(g, pts[q], nullptr, out.col(q).data());
  return out;
}

KineticPart kinetic_part_f1(const VelocityGrid& g, const LinearizedKernel& K, const std::vector<EulerPoint>& pts,
                            double solvability_tol, const PinvOptions& opt) {
  const int m = static_cast<int>(pts.size());
  Mat H(g.size(), m), G(g.size(), m);
  std::vector<FluidState> states(m);
  double pmax = 0.0, gmax = 0.0;
  for (int q = 0; q < m; ++q) {
    states[q] = pts[q].s;
    point_fields(g, pts[q], H.col(q).data(), G.col(q).data());
    NullSpace ns(g, pts[q].s);
    pmax = std::max(pmax, column_norm(g, ns.project(G.col(q))));
    // scale: the x-derivative part alone, which the time derivative cancels
    const EulerPoint& e = pts[q];
    const Vec sq = sqrt_maxwellian(g, e.s);
    Vec X(g.size());
    for (int k = 0; k < g.size(); ++k) {
      const Vec3 c = g.node(k) - e.s.u;
      X[k] = g.vz[k] * sq[k] *
             (e.drho / e.s.rho + c.dot(e.du) / e.s.T + (c.squaredNorm() / (2.0 * e.s.T) - 1.5) * e.dT / e.s.T);
    }
    gmax = std::max({gmax, column_norm(g, G.col(q)), column_norm(g, X)});
    H.col(q) = ns.complement(H.col(q));
  }
  KineticPart kp;
  kp.solvability_residual = gmax > 0.0 ? pmax / gmax : 0.0;
  if (kp.solvability_residual > solvability_tol)
    throw std::domain_error("kinetic_part_f1: fluid projection of the Maxwellian transport does not vanish (" +
                            std::to_string(kp.solvability_residual) + ")");
  kp.k1 = -solve_columns(K, g, states, H, opt);
  return kp;
}

FluxMoments flux_moments(const VelocityGrid& g, const std::vector<EulerPoint>& pts, const Mat& k1) {
  const int m = static_cast<int>(pts.size());
  FluxMoments f;
  f.tau1.resize(m);
  f.tau2.resize(m);
  f.tau3.resize(m);
  f.q.resize(m);
  f.stheta.resize(m);
  for (int p = 0; p < m; ++p) {
    const FluidState& s = pts[p].s;
    const Vec sq = sqrt_maxwellian(g, s);
    double t[3] = {0, 0, 0}, q = 0.0;
    for (int k = 0; k < g.size(); ++k) {
      const Vec3 c = g.node(k) - s.u;
      const double c2 = c.squaredNorm();
      const double wk = g.w * sq[k] * k1(k, p);
      for (int i = 0; i < 3; ++i) t[i] += (c[i] * c[2] - (i == 2 ? c2 / 3.0 : 0.0)) * wk;
      q += 0.5 * c[2] * (c2 - 5.0 * s.T) * wk;
    }
    f.tau1[p] = t[0];
    f.tau2[p] = t[1];
    f.tau3[p] = t[2];
    f.q[p] = q;
    f.stheta[p] = 2.0 * q + 2.0 * (s.u[0] * t[0] + s.u[1] * t[1] + s.u[2] * t[2]);
  }
  return f;
}

PerpSources perp_sources(const FluxMoments& m, const std::vector<EulerPoint>& pts, double dx) {
  PerpSources s;
  auto d1 = fd_derivative(m.tau1, dx), d2 = fd_derivative(m.tau2, dx), d3 = fd_derivative(m.tau3, dx);
  auto dth = fd_derivative(m.stheta, dx);
  const int n = m.size();
  s.Fu1.resize(n);
  s.Fu2.resize(n);
  s.Fu3.resize(n);
  s.Ftheta.resize(n);
  for (int i = 0; i < n; ++i) {
    s.Fu1[i] = -d1[i];
    s.Fu2[i] = -d2[i];
    s.Fu3[i] = -d3[i];
    const Vec3& u = pts[i].s.u;
    s.Ftheta[i] = -dth[i] - 2.0 * (u[0] * s.Fu1[i] + u[1] * s.Fu2[i] + u[2] * s.Fu3[i]);
  }
  return s;
}

FluxTable::FluxTable(std::vector<double> times, std::vector<double> x)
    : times_(std::move(times)), x_(std::move(x)), data_(times_.size()) {}

void FluxTable::set(int m, const std::vector<EulerPoint>& pts, const FluxMoments& f) {
  auto& d = data_.at(m);
  const int n = f.size();
  if (n != static_cast<int>(x_.size())) throw std::invalid_argument("FluxTable::set: size mismatch");
  d[0] = f.tau1;
  d[1] = f.tau2;
  d[2] = f.tau3;
  d[3].resize(n);
  for (int i = 0; i < n; ++i) {
    const Vec3& u = pts[i].s.u;
    d[3][i] = f.q[i] + u[0] * f.tau1[i] + u[1] * f.tau2[i] + u[2] * f.tau3[i];
  }
}

std::array<std::vector<double>, 4> FluxTable::eval(double t, const std::vector<double>& xs) const {
  std::array<std::vector<double>, 4> out;
  for (auto& o : out) o.assign(xs.size(), 0.0);
  if (times_.empty()) return out;
  const InterpStencil ts = lagrange_stencil(times_, t, 4);
  const int n = static_cast<int>(x_.size());
  std::array<std::vector<double>, 4> at_t;
  for (int k = 0; k < 4; ++k) {
    at_t[k].assign(n, 0.0);
    for (size_t a = 0; a < ts.w.size(); ++a) {
      const auto& src = data_[ts.start + a][k];
      if (src.empty()) throw std::logic_error("FluxTable: sample not set");
      for (int i = 0; i < n; ++i) at_t[k][i] += ts.w[a] * src[i];
    }
  }
  for (size_t q = 0; q < xs.size(); ++q) {
    const InterpStencil xsw = lagrange_stencil(x_, xs[q], 6);
    for (int k = 0; k < 4; ++k) {
      double v = 0.0;
      for (size_t a = 0; a < xsw.w.size(); ++a) v += xsw.w[a] * at_t[k][xsw.start + a];
      out[k][q] = v;
    }
  }
  return out;
}

HyperbolicResult solve_linear_hyperbolic(const EulerField& init, double cfl, const std::vector<double>& times,
                                         const FluxTable& sources, const std::function<double(double)>& bc_J,
                                         const CorrectionField& ic, double compat_tol) {
  const int n = init.nx();
  const double dx = init.dx();
  if (ic.nx() != n) throw std::invalid_argument("solve_linear_hyperbolic: initial data size mismatch");
  auto J = [&](double t) { return bc_J ? bc_J(t) : 0.0; };
  {
    const double wall = 1.5 * ic.u1_3[0] - 0.5 * ic.u1_3[1];
    if (std::abs(wall + J(init.t)) > compat_tol)
      throw std::domain_error("solve_linear_hyperbolic: initial data incompatible with the wall condition");
  }
  std::vector<double> faces(n + 1);
  for (int i = 0; i <= n; ++i) faces[i] = i * dx;

  std::vector<Conserved> U = euler_conserved(init), V(n);
  for (int i = 0; i < n; ++i) {
    const Pert q{ic.rho1[i], {ic.u1_1[i], ic.u1_2[i], ic.u1_3[i]}, ic.theta1[i] / 3.0};
    V[i] = cons_of(prim(U[i]), q);
  }

  auto lin_rhs = [&](const std::vector<Conserved>& Ub, const std::vector<Conserved>& W, double t) {
    std::vector<Conserved> Eb(n + 4), Ew(n + 4);
    for (int i = 0; i < n; ++i) {
      Eb[i + 2] = Ub[i];
      Ew[i + 2] = W[i];
    }
    const double jw = J(t);
    for (int gh = 0; gh < 2; ++gh) {
      Conserved mb = Ub[gh];
      mb[3] = -mb[3];
      Eb[1 - gh] = mb;
      Pert q = pert_of(prim(Ub[gh]), W[gh]);
      q.u[2] = -2.0 * jw - q.u[2];
      Ew[1 - gh] = cons_of(prim(mb), q);
      Eb[n + 2 + gh] = Ub[n - 1];
      Ew[n + 2 + gh] = W[n - 1];
    }
    const auto S = sources.eval(t, faces);
    std::vector<Conserved> F(n + 1);
    for (int f = 0; f <= n; ++f) {
      const int L = f + 1, R = f + 2;
      Conserved bL, bR, wL, wR;
      for (int k = 0; k < 5; ++k) {
        bL[k] = Eb[L][k] + 0.25 * (Eb[L + 1][k] - Eb[L - 1][k]);
        bR[k] = Eb[R][k] - 0.25 * (Eb[R + 1][k] - Eb[R - 1][k]);
        wL[k] = Ew[L][k] + 0.25 * (Ew[L + 1][k] - Ew[L - 1][k]);
        wR[k] = Ew[R][k] - 0.25 * (Ew[R + 1][k] - Ew[R - 1][k]);
      }
      const Prim pL = prim(bL), pR = prim(bR);
      const double a = std::max(wave_speed(pL), wave_speed(pR));
      const Conserved FL = lin_flux(pL, wL), FR = lin_flux(pR, wR);
      for (int k = 0; k < 5; ++k) F[f][k] = 0.5 * (FL[k] + FR[k]) - 0.5 * a * (wR[k] - wL[k]);
      for (int k = 0; k < 4; ++k) F[f][1 + k] += S[k][f];
    }
    std::vector<Conserved> out(n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < 5; ++k) out[i][k] = -(F[i + 1][k] - F[i][k]) / dx;
    return out;
  };
  auto comb = [&](const std::vector<Conserved>& A, double a, const std::vector<Conserved>& B, double b,
                  const std::vector<Conserved>& R, double c) {
    std::vector<Conserved> o(n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < 5; ++k) o[i][k] = a * A[i][k] + b * B[i][k] + c * R[i][k];
    return o;
  };

  HyperbolicResult res;
  EulerField f = init;
  const EulerBounds bounds = EulerBounds::from(init);
  auto snapshot = [&](double t) {
    f.t = t;
    res.euler.push_back(f);
    CorrectionField c = zero_correction(f);
    for (int i = 0; i < n; ++i) {
      const Pert q = pert_of(prim(U[i]), V[i]);
      c.rho1[i] = q.r;
      c.u1_1[i] = q.u[0];
      c.u1_2[i] = q.u[1];
      c.u1_3[i] = q.u[2];
      c.theta1[i] = 3.0 * q.dT;
    }
    res.correction.push_back(std::move(c));
  };
  double t = init.t;
  for (double target : times) {
    if (target < t - 1e-14) throw std::invalid_argument("solve_linear_hyperbolic: sample times must be ascending");
    while (t < target - 1e-14) {
      euler_assign(f, U);
      const double dt = std::min(euler_stable_dt(f, cfl), target - t);
      auto k1 = euler_rhs(U, dx);
      auto l1 = lin_rhs(U, V, t);
      auto U1 = comb(U, 1.0, U, 0.0, k1, dt);
      auto V1 = comb(V, 1.0, V, 0.0, l1, dt);
      auto k2 = euler_rhs(U1, dx);
      auto l2 = lin_rhs(U1, V1, t + dt);
      auto U2 = comb(U, 0.75, U1, 0.25, k2, 0.25 * dt);
      auto V2 = comb(V, 0.75, V1, 0.25, l2, 0.25 * dt);
      auto k3 = euler_rhs(U2, dx);
      auto l3 = lin_rhs(U2, V2, t + 0.5 * dt);
      U = comb(U, 1.0 / 3.0, U2, 2.0 / 3.0, k3, 2.0 / 3.0 * dt);
      V = comb(V, 1.0 / 3.0, V2, 2.0 / 3.0, l3, 2.0 / 3.0 * dt);
      t += dt;
      euler_assign(f, U);
      for (int i = 0; i < n; ++i)
        if (f.rho[i] < bounds.rho_lo || f.rho[i] > bounds.rho_hi || f.T[i] < bounds.T_lo || f.T[i] > bounds.T_hi)
          throw std::domain_error("solve_linear_hyperbolic: Euler state left the admissible bounds");
    }
    t = target;
    euler_assign(f, U);
    snapshot(target);
  }
  return res;
}

Mat fluid_part_f1(const VelocityGrid& g, const std::vector<EulerPoint>& pts, const CorrectionField& c) {
  const int m = static_cast<int>(pts.size());
  if (c.nx() != m) throw std::invalid_argument("fluid_part_f1: size mismatch");
  Mat out(g.size(), m);
  for (int p = 0; p < m; ++p) {
    const FluidState& s = pts[p].s;
    const Vec M = maxwellian(g, s);
    const Vec3 u1(c.u1_1[p], c.u1_2[p], c.u1_3[p]);
    for (int k = 0; k < g.size(); ++k) {
      const Vec3 cc = g.node(k) - s.u;
      out(k, p) = M[k] * (c.rho1[p] / s.rho + u1.dot(cc) / s.T +
                          c.theta1[p] / (6.0 * s.T) * (cc.squaredNorm() / s.T - 3.0));
    }
  }
  return out;
}

Mat transport_of(const VelocityGrid& g, const std::vector<Mat>& F, int m, double dt, double dx) {
  const int ns = static_cast<int>(F.size());
  const int np = static_cast<int>(F[m].cols());
  Mat Ft = Mat::Zero(F[m].rows(), np);
  const FdStencil st = fd_stencil(m, ns);
  for (int k = 0; k < st.len; ++k) Ft += (st.c[k] / dt) * F[st.start + k];
  Mat D = Mat::Zero(np, np);
  for (int j = 0; j < np; ++j) {
    const FdStencil sx = fd_stencil(j, np);
    for (int k = 0; k < sx.len; ++k) D(j, sx.start + k) = sx.c[k] / dx;
  }
  Mat Fx = F[m] * D.transpose();
  return Ft + g.vz.asDiagonal() * Fx;
}

Mat x_derivatives(const Mat& F, const std::vector<double>& xs, double z, int order, int npts) {
  const int n = static_cast<int>(xs.size());
  npts = std::min(npts, n);
  const int i = static_cast<int>(std::lower_bound(xs.begin(), xs.end(), z) - xs.begin());
  const int start = std::clamp(i - npts / 2, 0, n - npts);
  std::vector<double> sub(xs.begin() + start, xs.begin() + start + npts);
  const auto w = fd_weights(z, sub, order);
  Mat out = Mat::Zero(F.rows(), order + 1);
  for (int d = 0; d <= order; ++d)
    for (int a = 0; a < npts; ++a) out.col(d) += w[d][a] * F.col(start + a);
  return out;
}

Mat kinetic_part_f2(const CollisionModel& Q, const Mat& M, const Mat& F1, const Mat& transportF1,
                    const InteriorOptions& opt, double* solvability) {
  const VelocityGrid& g = Q.grid();
  const int m = static_cast<int>(M.cols());
  const Mat quad = Q.quadratic(M, F1, opt.fd_delta);
  const Mat sq = sqrt_cols(M);
  Mat R = opt.sign == GSign::Hierarchy ? Mat(quad - transportF1) : Mat(-(transportF1 + quad));
  R = R.cwiseQuotient(sq);
  std::vector<FluidState> states(m);
  double pmax = 0.0, rmax = 0.0;
  for (int c = 0; c < m; ++c) {
    states[c] = match_moments(g, conserved_moments(g, M.col(c)));
    NullSpace ns(g, states[c]);
    const Vec p = ns.project(R.col(c));
    pmax = std::max(pmax, column_norm(g, p));
    rmax = std::max(rmax, column_norm(g, R.col(c)));
    R.col(c) -= p;
  }
  const double rel = rmax > 0.0 ? pmax / rmax : 0.0;
  if (solvability) *solvability = rel;
  if (rel > opt.f2_solvability_tol)
    throw std::domain_error("kinetic_part_f2: fluid part of the right-hand side too large (" + std::to_string(rel) +
                            ")");
  Mat f2 = solve_columns(Q.kernel(), g, states, R, opt.pinv);
  return sq.cwiseProduct(f2);
}

InteriorExpansion build_interior(const CollisionModel& Q, const InteriorInputs& in, const InteriorOptions& opt,
                                 HyperbolicResult* trajectory) {
  const VelocityGrid& g = Q.grid();
  const int ns = static_cast<int>(in.times.size());
  if (ns < 5) throw std::invalid_argument("build_interior: need at least 5 sample times");
  if (in.x.size() < 8 || in.x[0] != 0.0) throw std::invalid_argument("build_interior: nodes must start at the wall");
  InteriorExpansion ex;
  ex.times = in.times;
  ex.x = in.x;
  ex.dt = in.times[1] - in.times[0];
  ex.dx = in.x[1] - in.x[0];
  for (int m = 1; m < ns; ++m)
    if (std::abs(in.times[m] - in.times[m - 1] - ex.dt) > 1e-9 * ex.dt)
      throw std::invalid_argument("build_interior: sample times must be uniform");

  const auto euler = run_euler(in.euler_init, in.euler_cfl, in.times);
  ex.pts.resize(ns);
  ex.k1.resize(ns);
  ex.J.resize(ns);
  FluxTable table(in.times, in.x);
  for (int m = 0; m < ns; ++m) {
    ex.pts[m] = sample_euler(euler[m], in.x);
    KineticPart kp = kinetic_part_f1(g, Q.kernel(), ex.pts[m], opt.f1_solvability_tol, opt.pinv);
    ex.f1_solvability = std::max(ex.f1_solvability, kp.solvability_residual);
    ex.k1[m] = std::move(kp.k1);
    table.set(m, ex.pts[m], flux_moments(g, ex.pts[m], ex.k1[m]));
    // the k = 1 layer sources vanish, so Psi_1 = Theta_1 = 0
    ex.J[m] = boundary_functional_J(g, ex.pts[m][0].s, ex.k1[m].col(0), 0.0, 0.0);
  }
  auto Jfun = [&ex](double t) {
    const InterpStencil s = lagrange_stencil(ex.times, t, 4);
    double v = 0.0;
    for (size_t a = 0; a < s.w.size(); ++a) v += s.w[a] * ex.J[s.start + a];
    return v;
  };
  const CorrectionField ic =
      in.correction_ic.nx() == in.euler_init.nx() ? in.correction_ic : zero_correction(in.euler_init);
  HyperbolicResult hr = solve_linear_hyperbolic(in.euler_init, in.euler_cfl, in.times, table, Jfun, ic);

  ex.corr.resize(ns);
  ex.M.resize(ns);
  ex.F1.resize(ns);
  ex.F2.resize(ns);
  for (int m = 0; m < ns; ++m) {
    ex.corr[m] = sample_correction(hr.correction[m], in.x, -ex.J[m]);
    const int np = static_cast<int>(in.x.size());
    ex.M[m].resize(g.size(), np);
    for (int p = 0; p < np; ++p) ex.M[m].col(p) = maxwellian(g, ex.pts[m][p].s);
    ex.F1[m] = fluid_part_f1(g, ex.pts[m], ex.corr[m]) + sqrt_cols(ex.M[m]).cwiseProduct(ex.k1[m]);
  }
  for (int m = 0; m < ns; ++m) {
    const Mat tF1 = transport_of(g, ex.F1, m, ex.dt, ex.dx);
    double solv = 0.0;
    ex.F2[m] = kinetic_part_f2(Q, ex.M[m], ex.F1[m], tF1, opt, &solv);
    ex.f2_solvability = std::max(ex.f2_solvability, solv);
  }
  if (trajectory) *trajectory = std::move(hr);
  return ex;
}

HierarchyResiduals hierarchy_residuals(const CollisionModel& Q, const InteriorExpansion& ex,
                                       const InteriorOptions& opt) {
  const VelocityGrid& g = Q.grid();
  double s0 = 0.0, s1 = 0.0;
  long count = 0;
  for (int m = 0; m < ex.samples(); ++m) {
    const Mat sq = sqrt_cols(ex.M[m]);
    Mat T0 = transport_of(g, ex.M, m, ex.dt, ex.dx).cwiseQuotient(sq);
    Mat R1 = transport_of(g, ex.F1, m, ex.dt, ex.dx) - Q.linear(ex.M[m], ex.F2[m]) -
             Q.quadratic(ex.M[m], ex.F1[m], opt.fd_delta);
    R1 = R1.cwiseQuotient(sq);
    for (int p = 0; p < ex.nodes(); ++p) {
      NullSpace ns(g, ex.pts[m][p].s);
      s0 += g.w * ns.project(T0.col(p)).squaredNorm();
      s1 += g.w * R1.col(p).squaredNorm();
      ++count;
    }
  }
  return {std::sqrt(s0 / count), std::sqrt(s1 / count)};
}

void write_correction_csv(const CorrectionField& c, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "x3,rho1,u1_1,u1_2,u1_3,theta1\n" << std::setprecision(17);
  for (int i = 0; i < c.nx(); ++i)
    os << c.x[i] << ',' << c.rho1[i] << ',' << c.u1_1[i] << ',' << c.u1_2[i] << ',' << c.u1_3[i] << ','
       << c.theta1[i] << '\n';
}

}  // namespace kn
