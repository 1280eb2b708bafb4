#include "knudsen/boltzmann_slab.hpp"

#include "knudsen/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace kn {

std::vector<double> node_weights(const std::vector<double>& x, bool periodic) {
  const size_t n = x.size();
  std::vector<double> w(n, 0.0);
  if (n < 2) return w;
  if (periodic) {
    std::fill(w.begin(), w.end(), x[1] - x[0]);
    return w;
  }
  for (size_t j = 0; j + 1 < n; ++j) {
    const double h = 0.5 * (x[j + 1] - x[j]);
    w[j] += h;
    w[j + 1] += h;
  }
  return w;
}

double KineticState::mass(const VelocityGrid& g, bool periodic) const {
  const auto w = node_weights(x, periodic);
  double s = 0.0;
  for (size_t j = 0; j < w.size(); ++j) s += w[j] * F.col(static_cast<int>(j)).sum();
  return s * g.w;
}

void apply_diffuse_bc(Eigen::Ref<Vec> F, const WallMaxwellian& wall, const VelocityGrid& g) {
  double out = 0.0;
  for (int k = 0; k < g.size(); ++k)
    if (g.vz[k] < 0.0) out -= g.vz[k] * F[k];
  out *= g.w;
  for (int k = 0; k < g.size(); ++k)
    if (g.vz[k] > 0.0) F[k] = wall.values[k] * out;
}

double wall_mass_flux(const Vec& F, const VelocityGrid& g) { return g.vz.dot(F) * g.w; }

namespace {

// largest eigenvalue of a symmetric positive semidefinite matrix
double spectral_radius(const Mat& A) {
  Vec x = Vec::LinSpaced(A.rows(), 1.0, 2.0);
  x.normalize();
  double lam = 0.0;
  for (int it = 0; it < 60; ++it) {
    Vec y = A * x;
    const double l = x.dot(y);
    const double ny = y.norm();
    if (ny == 0.0) return 0.0;
    x = y / ny;
    if (it > 5 && std::abs(l - lam) <= 1e-6 * std::abs(l)) return std::max(l, ny);
    lam = l;
  }
  return lam;
}

}  // namespace

BoltzmannSlab::BoltzmannSlab(const CollisionModel& Q, std::vector<double> x, double eps, SlabOptions opt)
    : Q_(Q), x_(std::move(x)), eps_(eps), opt_(opt) {
  const int n = static_cast<int>(x_.size());
  if (n < 8) throw std::invalid_argument("BoltzmannSlab: need at least 8 nodes");
  if (!(eps > 0.0)) throw std::invalid_argument("BoltzmannSlab: eps must be positive");
  dx_min_ = 1e300;
  for (int j = 0; j + 1 < n; ++j) {
    const double d = x_[j + 1] - x_[j];
    if (!(d > 0.0)) throw std::invalid_argument("BoltzmannSlab: nodes must increase");
    dx_min_ = std::min(dx_min_, d);
  }
  pos_.resize(n);
  neg_.resize(n);
  auto make = [&](int j, int left, int right) {
    Stencil s;
    s.start = j - left;
    std::vector<double> xs;
    if (opt_.periodic) {
      for (int q = -left; q <= right; ++q) xs.push_back(q * dx_min_);
      s.w = fd_weights(0.0, xs, 1)[1];
    } else {
      for (int q = j - left; q <= j + right; ++q) xs.push_back(x_[q]);
      s.w = fd_weights(x_[j], xs, 1)[1];
    }
    return s;
  };
  for (int j = 0; j < n; ++j) {
    if (opt_.periodic) {
      pos_[j] = make(j, 3, 2);
      neg_[j] = make(j, 2, 3);
      continue;
    }
    if (j == n - 1) continue;
    if (j > 0) {
      const int left = std::min(3, j);
      const int right = left < 3 ? 1 : std::min(2, n - 1 - j);
      pos_[j] = make(j, left, right);
    }
    const int right = std::min(3, n - 1 - j);
    const int left = right < 3 ? 1 : std::min(2, j);
    neg_[j] = make(j, left, right);
  }
  if (opt_.periodic) {
    for (int j = 1; j < n; ++j)
      if (std::abs(x_[j] - x_[j - 1] - dx_min_) > 1e-12 * dx_min_)
        throw std::invalid_argument("BoltzmannSlab: periodic mode needs uniform nodes");
  }
  lambda_ = spectral_radius(Q_.kernel().matrix());
}

double BoltzmannSlab::max_dt(const Mat& F) const {
  const VelocityGrid& g = Q_.grid();
  const double vmax = g.vz.cwiseAbs().maxCoeff();
  double amp = 0.0;
  for (int j = 0; j < F.cols(); ++j) {
    const auto m = conserved_moments(g, F.col(j));
    const double rho = m[0];
    if (!(rho > 0.0)) throw std::runtime_error("BoltzmannSlab: non-positive density");
    const Vec3 u = m.segment<3>(1) / rho;
    const double T = std::max((2.0 * m[4] / rho - u.squaredNorm()) / 3.0, 1e-12);
    amp = std::max(amp, rho * std::sqrt(T));
  }
  const double dt_transport = opt_.cfl * dx_min_ / vmax;
  const double dt_collision = 1.2 * eps_ / (lambda_ * amp);
  return std::min(dt_transport, dt_collision);
}

void BoltzmannSlab::impose_boundary(Mat& F, double t) const {
  if (opt_.periodic) return;
  if (!wall_ || !far_) throw std::logic_error("BoltzmannSlab: wall and far-end data must be set");
  const VelocityGrid& g = Q_.grid();
  const FluidState s = wall_(t);
  apply_diffuse_bc(F.col(0), wall_maxwellian(s.u, s.T, g), g);
  F.col(F.cols() - 1) = far_(t);
}

Mat BoltzmannSlab::rhs(const Mat& F) const {
  const VelocityGrid& g = Q_.grid();
  const int N = g.size();
  const int n = static_cast<int>(x_.size());
  if (F.rows() != N || F.cols() != n) throw std::invalid_argument("BoltzmannSlab::rhs: shape mismatch");
  const int active = opt_.periodic ? n : n - 1;
  Mat R = Mat::Zero(N, n);
  R.leftCols(active) = Q_.apply(Mat(F.leftCols(active))) / eps_;

  Vec pos = (g.vz.array() > 0.0).cast<double>().matrix();
  Vec neg = Vec::Ones(N) - pos;
  auto col = [&](int q) { return opt_.periodic ? ((q % n) + n) % n : q; };
  Vec dp(N), dn(N);
  for (int j = 0; j < active; ++j) {
    dp.setZero();
    dn.setZero();
    if (opt_.periodic || j > 0)
      for (size_t a = 0; a < pos_[j].w.size(); ++a) dp += pos_[j].w[a] * F.col(col(pos_[j].start + a));
    for (size_t a = 0; a < neg_[j].w.size(); ++a) dn += neg_[j].w[a] * F.col(col(neg_[j].start + a));
    R.col(j) -= g.vz.cwiseProduct(pos.cwiseProduct(dp) + neg.cwiseProduct(dn));
  }
  if (!opt_.periodic) R.col(0) = R.col(0).cwiseProduct(neg);
  return R;
}

void BoltzmannSlab::step(KineticState& s, double dt, StepStats* stats) const {
  if (!(dt > 0.0)) throw std::invalid_argument("BoltzmannSlab::step: dt must be positive");
  const double lim = max_dt(s.F);
  if (dt > lim * (1.0 + 1e-12))
    throw std::runtime_error("BoltzmannSlab::step: dt " + std::to_string(dt) + " exceeds the stable bound " +
                             std::to_string(lim));
  const double t = s.t;
  impose_boundary(s.F, t);
  const Mat k1 = rhs(s.F);
  Mat G = s.F + 0.5 * dt * k1;
  impose_boundary(G, t + 0.5 * dt);
  const Mat k2 = rhs(G);
  G = s.F + 0.5 * dt * k2;
  impose_boundary(G, t + 0.5 * dt);
  const Mat k3 = rhs(G);
  G = s.F + dt * k3;
  impose_boundary(G, t + dt);
  const Mat k4 = rhs(G);
  s.F += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  s.t = t + dt;
  impose_boundary(s.F, s.t);

  // positivity
  const auto w = node_weights(x_, opt_.periodic);
  double clipped = 0.0;
  for (int j = 0; j < s.F.cols(); ++j) {
    double c = 0.0;
    for (int k = 0; k < s.F.rows(); ++k)
      if (s.F(k, j) < 0.0) {
        c -= s.F(k, j);
        s.F(k, j) = 0.0;
      }
    clipped += w[j] * c;
  }
  clipped *= Q_.grid().w;
  if (stats) {
    ++stats->steps;
    stats->clipped_mass += clipped;
  }
  if (clipped > opt_.clip_tol * s.mass(Q_.grid(), opt_.periodic))
    throw std::runtime_error("BoltzmannSlab::step: clipped mass " + std::to_string(clipped) + " above tolerance");
}

void BoltzmannSlab::advance_to(KineticState& s, double t_end, StepStats* stats) const {
  const double span = t_end - s.t;
  if (span <= 0.0) return;
  const int steps = static_cast<int>(std::ceil(span / max_dt(s.F) * (1.0 - 1e-12)));
  const double dt = span / steps;
  const double t0 = s.t;
  for (int i = 0; i < steps; ++i) {
    step(s, dt, stats);
    s.t = i + 1 == steps ? t_end : t0 + (i + 1) * dt;
  }
}

// ---------------------------------------------------------------------------
// norms

NormMonitor NormMonitor::from_max_temperature(double maxT, int ell) {
  if (ell < 7) throw std::invalid_argument("NormMonitor: weight exponent must be at least 7");
  NormMonitor m;
  m.ell = ell;
  m.T_M = 0.75 * maxT;
  return m;
}

void NormMonitor::check(double maxT) const {
  if (!(T_M < maxT && maxT < 2.0 * T_M))
    throw std::runtime_error("NormMonitor: T_M = " + std::to_string(T_M) + " incompatible with max T = " +
                             std::to_string(maxT));
}

void NormMonitor::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "t,mass,l2_f,linf_h,boundary_residual\n" << std::setprecision(17);
  for (const auto& r : records)
    os << r.t << ',' << r.mass << ',' << r.l2_f << ',' << r.linf_h << ',' << r.boundary_residual << '\n';
}

FieldNorms field_norms(const VelocityGrid& g, const std::vector<double>& x, const Mat& G, const Mat& M,
                       const NormMonitor& mon, bool periodic) {
  const auto wx = node_weights(x, periodic);
  FluidState sM;
  sM.T = mon.T_M;
  const Vec sqMM = sqrt_maxwellian(g, sM);
  Vec weight(g.size());
  for (int k = 0; k < g.size(); ++k) weight[k] = std::pow(1.0 + g.node(k).squaredNorm(), 0.5 * mon.ell) / sqMM[k];
  FieldNorms out;
  double s = 0.0;
  for (int j = 0; j < G.cols(); ++j) {
    s += wx[j] * G.col(j).cwiseAbs2().cwiseQuotient(M.col(j)).sum();
    out.linf = std::max(out.linf, G.col(j).cwiseAbs().cwiseProduct(weight).maxCoeff());
  }
  out.l2 = std::sqrt(s * g.w);
  return out;
}

WeightedNorms weighted_norms(const VelocityGrid& g, const std::vector<double>& x, const Mat& F, const Mat& F_approx,
                             const Mat& M, double eps, const NormMonitor& mon) {
  const FieldNorms n = field_norms(g, x, (F - F_approx) / (eps * eps), M, mon);
  WeightedNorms w;
  w.l2_f = n.l2;
  w.linf_h = n.linf;
  w.combined = n.l2 + std::pow(eps, 1.5) * n.linf;
  return w;
}

MaxwellianBounds maxwellian_bounds(const VelocityGrid& g, const Mat& M, double T_M, double z) {
  FluidState sM;
  sM.T = T_M;
  const Vec MM = maxwellian(g, sM);
  const Vec MMz = MM.array().pow(z).matrix();
  MaxwellianBounds b{1e300, 0.0};
  for (int j = 0; j < M.cols(); ++j) {
    b.C1 = std::min(b.C1, M.col(j).cwiseQuotient(MM).minCoeff());
    b.C2 = std::max(b.C2, M.col(j).cwiseQuotient(MMz).maxCoeff());
  }
  return b;
}

DissipationCheck boundary_dissipation(const Vec& f, const WallMaxwellian& wall, const Vec& sqrtM0,
                                      const VelocityGrid& g) {
  const Vec Df = diffusive_Dw(f, wall, sqrtM0, g);
  DissipationCheck c;
  for (int k = 0; k < g.size(); ++k) {
    const double v = g.vz[k];
    c.lhs -= 0.5 * v * f[k] * f[k];
    if (v < 0.0) {
      const double r = f[k] - Df[k];
      c.rhs -= 0.5 * v * r * r;
      c.B2 -= v * Df[k] * r;
    } else {
      c.bc_defect = std::max(c.bc_defect, std::abs(f[k] - Df[k]));
    }
  }
  c.lhs *= g.w;
  c.rhs *= g.w;
  c.B2 *= g.w;
  c.residual = std::abs(c.lhs - c.rhs);
  return c;
}

DissipationCheck boundary_dissipation_check(const Vec& f, const WallMaxwellian& wall, const Vec& sqrtM0,
                                            const VelocityGrid& g, double bc_tol) {
  const DissipationCheck c = boundary_dissipation(f, wall, sqrtM0, g);
  const double scale = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
  if (c.bc_defect > bc_tol * scale)
    throw std::invalid_argument("boundary_dissipation_check: trace does not satisfy the diffuse condition");
  return c;
}

}  // namespace kn
