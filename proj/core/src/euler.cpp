#include "knudsen/euler.hpp"

#include "knudsen/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace kn {

namespace {

constexpr double kGamma = 5.0 / 3.0;
using U5 = std::array<double, 5>;

U5 to_conserved(double r, double a, double b, double c, double T) {
  return {r, r * a, r * b, r * c, r * (0.5 * (a * a + b * b + c * c) + 1.5 * T)};
}

void to_primitive(const U5& U, double& r, double& a, double& b, double& c, double& T) {
  r = U[0];
  a = U[1] / r;
  b = U[2] / r;
  c = U[3] / r;
  T = (U[4] / r - 0.5 * (a * a + b * b + c * c)) / 1.5;
}

U5 flux(const U5& U, double& speed) {
  double r, a, b, c, T;
  to_primitive(U, r, a, b, c, T);
  const double p = r * T;
  speed = std::abs(c) + std::sqrt(kGamma * std::max(T, 0.0));
  return {r * c, r * a * c, r * b * c, r * c * c + p, (U[4] + p) * c};
}

// conserved state with two ghost cells on each side
std::vector<U5> extend(const std::vector<U5>& U) {
  const int n = static_cast<int>(U.size());
  std::vector<U5> E(n + 4);
  for (int i = 0; i < n; ++i) E[i + 2] = U[i];
  for (int g = 0; g < 2; ++g) {
    U5 m = U[g];
    m[3] = -m[3];
    E[1 - g] = m;
    E[n + 2 + g] = U[n - 1];
  }
  return E;
}

std::vector<U5> rhs_impl(const std::vector<U5>& U, double dx) {
  const int n = static_cast<int>(U.size());
  std::vector<U5> E = extend(U);
  std::vector<U5> F(n + 1);
  auto slope = [&](int e, int k) { return 0.5 * (E[e + 1][k] - E[e - 1][k]); };
  for (int f = 0; f <= n; ++f) {
    // face between extended cells f+1 and f+2
    const int L = f + 1, R = f + 2;
    U5 UL, UR;
    for (int k = 0; k < 5; ++k) {
      UL[k] = E[L][k] + 0.5 * slope(L, k);
      UR[k] = E[R][k] - 0.5 * slope(R, k);
    }
    double sL, sR;
    U5 FL = flux(UL, sL), FR = flux(UR, sR);
    const double a = std::max(sL, sR);
    for (int k = 0; k < 5; ++k) F[f][k] = 0.5 * (FL[k] + FR[k]) - 0.5 * a * (UR[k] - UL[k]);
  }
  std::vector<U5> out(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 5; ++k) out[i][k] = -(F[i + 1][k] - F[i][k]) / dx;
  return out;
}

// bump at x = 1 plus its mirror image, so the profile is even about the wall
double gauss_bump(double x) {
  return std::exp(-(x - 1.0) * (x - 1.0) / 0.1) + std::exp(-(x + 1.0) * (x + 1.0) / 0.1);
}
double gauss_bump_dx(double x) {
  return -2.0 * (x - 1.0) / 0.1 * std::exp(-(x - 1.0) * (x - 1.0) / 0.1) -
         2.0 * (x + 1.0) / 0.1 * std::exp(-(x + 1.0) * (x + 1.0) / 0.1);
}

}  // namespace

double EulerField::mass() const {
  double m = 0.0;
  for (double r : rho) m += r;
  return m * dx();
}

ManufacturedProfile manufactured_profile(const std::string& id, double a) {
  ManufacturedProfile p;
  p.id = id;
  p.amplitude = a;
  if (id == "gauss-density") {
    p.value = [a](double x) { return std::array<double, 5>{1.0 + a * gauss_bump(x), 0, 0, 0, 1.0}; };
    p.derivative = [a](double x) { return std::array<double, 5>{a * gauss_bump_dx(x), 0, 0, 0, 0}; };
  } else if (id == "tangential-shear") {
    p.value = [a](double x) { return std::array<double, 5>{1.0, a * gauss_bump(x), 0, 0, 1.0}; };
    p.derivative = [a](double x) { return std::array<double, 5>{0, a * gauss_bump_dx(x), 0, 0, 0}; };
  } else if (id == "uniform") {
    p.value = [](double) { return std::array<double, 5>{1.0, 0, 0, 0, 1.0}; };
    p.derivative = [](double) { return std::array<double, 5>{0, 0, 0, 0, 0}; };
  } else {
    throw std::invalid_argument("unknown Euler profile: " + id);
  }
  return p;
}

EulerField manufactured_state(const ManufacturedProfile& p, int nx, double xmax) {
  if (nx < 8 || !(xmax > 0.0)) throw std::invalid_argument("manufactured_state: bad grid");
  EulerField f;
  f.xmax = xmax;
  const double dx = xmax / nx;
  for (int i = 0; i < nx; ++i) {
    const double x = (i + 0.5) * dx;
    auto v = p.value(x);
    f.x.push_back(x);
    f.rho.push_back(v[0]);
    f.u1.push_back(v[1]);
    f.u2.push_back(v[2]);
    f.u3.push_back(v[3]);
    f.T.push_back(v[4]);
    if (!(v[0] > 0.0) || !(v[4] > 0.0)) throw std::domain_error("manufactured_state: non-positive density or temperature");
  }
  if (std::abs(p.value(0.0)[3]) > 0.0) throw std::domain_error("manufactured_state: u3 does not vanish at the wall");
  return f;
}

EulerField manufactured_state(const std::string& id, double amplitude, int nx, double xmax) {
  return manufactured_state(manufactured_profile(id, amplitude), nx, xmax);
}

EulerBounds EulerBounds::from(const EulerField& f) {
  EulerBounds b;
  b.rho_lo = 0.5 * *std::min_element(f.rho.begin(), f.rho.end());
  b.rho_hi = 2.0 * *std::max_element(f.rho.begin(), f.rho.end());
  b.T_lo = 0.5 * *std::min_element(f.T.begin(), f.T.end());
  b.T_hi = 2.0 * *std::max_element(f.T.begin(), f.T.end());
  return b;
}

double euler_max_speed(const EulerField& f) {
  double s = 0.0;
  for (int i = 0; i < f.nx(); ++i) s = std::max(s, std::abs(f.u3[i]) + std::sqrt(kGamma * f.T[i]));
  return s;
}

double euler_stable_dt(const EulerField& f, double cfl) { return cfl * f.dx() / euler_max_speed(f); }

EulerField advance_euler(const EulerField& f, double dt, double cfl, const EulerBounds* bounds) {
  if (!(dt > 0.0)) throw std::invalid_argument("advance_euler: dt must be positive");
  if (dt > euler_stable_dt(f, cfl) * (1.0 + 1e-12)) throw std::domain_error("advance_euler: CFL condition violated");
  const int n = f.nx();
  const double dx = f.dx();
  std::vector<U5> U(n);
  for (int i = 0; i < n; ++i) U[i] = to_conserved(f.rho[i], f.u1[i], f.u2[i], f.u3[i], f.T[i]);

  auto axpy = [&](const std::vector<U5>& A, double a, const std::vector<U5>& B, double b, const std::vector<U5>& R,
                  double c) {
    std::vector<U5> out(n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < 5; ++k) out[i][k] = a * A[i][k] + b * B[i][k] + c * R[i][k];
    return out;
  };
  std::vector<U5> k1 = rhs_impl(U, dx);
  std::vector<U5> U1 = axpy(U, 1.0, U, 0.0, k1, dt);
  std::vector<U5> k2 = rhs_impl(U1, dx);
  std::vector<U5> U2 = axpy(U, 0.75, U1, 0.25, k2, 0.25 * dt);
  std::vector<U5> k3 = rhs_impl(U2, dx);
  std::vector<U5> U3 = axpy(U, 1.0 / 3.0, U2, 2.0 / 3.0, k3, 2.0 / 3.0 * dt);

  EulerField g = f;
  g.t = f.t + dt;
  for (int i = 0; i < n; ++i) {
    to_primitive(U3[i], g.rho[i], g.u1[i], g.u2[i], g.u3[i], g.T[i]);
    if (!(g.rho[i] > 0.0) || !(g.T[i] > 0.0))
      throw std::domain_error("advance_euler: positivity lost (smooth solution broke down)");
    if (bounds && (g.rho[i] < bounds->rho_lo || g.rho[i] > bounds->rho_hi || g.T[i] < bounds->T_lo ||
                   g.T[i] > bounds->T_hi))
      throw std::domain_error("advance_euler: state left the admissible bounds");
  }
  return g;
}

EulerRates euler_time_derivative(const EulerField& f) {
  const int n = f.nx();
  const double dx = f.dx();
  auto d = [&](const std::vector<double>& v) { return fd_derivative(v, dx); };
  std::vector<double> p(n);
  for (int i = 0; i < n; ++i) p[i] = f.rho[i] * f.T[i];
  auto dr = d(f.rho), d1 = d(f.u1), d2 = d(f.u2), d3 = d(f.u3), dT = d(f.T), dp = d(p);
  EulerRates r;
  r.rho.resize(n);
  r.u1.resize(n);
  r.u2.resize(n);
  r.u3.resize(n);
  r.T.resize(n);
  for (int i = 0; i < n; ++i) {
    const double c = f.u3[i];
    r.rho[i] = -(c * dr[i] + f.rho[i] * d3[i]);
    r.u1[i] = -c * d1[i];
    r.u2[i] = -c * d2[i];
    r.u3[i] = -c * d3[i] - dp[i] / f.rho[i];
    r.T[i] = -c * dT[i] - 2.0 / 3.0 * f.T[i] * d3[i];
  }
  return r;
}

std::vector<EulerField> run_euler(const EulerField& init, double cfl, const std::vector<double>& times) {
  std::vector<EulerField> out;
  EulerField f = init;
  const EulerBounds b = EulerBounds::from(init);
  for (double target : times) {
    if (target < f.t - 1e-14) throw std::invalid_argument("run_euler: sample times must be ascending");
    while (f.t < target - 1e-14) {
      double dt = std::min(euler_stable_dt(f, cfl), target - f.t);
      f = advance_euler(f, dt, cfl, &b);
    }
    f.t = target;
    out.push_back(f);
  }
  return out;
}

std::vector<double> interpolate_cells(const std::vector<double>& x, const std::vector<double>& v, int parity,
                                      const std::vector<double>& xs) {
  const int n = static_cast<int>(x.size());
  const double dx = x[1] - x[0];
  auto val = [&](int i) { return i >= 0 ? v[i] : parity * v[-1 - i]; };
  std::vector<double> out(xs.size());
  for (size_t q = 0; q < xs.size(); ++q) {
    const double t = xs[q] / dx - 0.5;  // fractional cell index
    int i0 = static_cast<int>(std::floor(t)) - 2;
    i0 = std::min(i0, n - 6);
    double s = 0.0;
    for (int a = 0; a < 6; ++a) {
      double l = 1.0;
      for (int b = 0; b < 6; ++b)
        if (b != a) l *= (t - (i0 + b)) / static_cast<double>(a - b);
      s += l * val(i0 + a);
    }
    out[q] = s;
  }
  return out;
}

std::vector<EulerPoint> sample_euler(const EulerField& f, const std::vector<double>& xs) {
  const double dx = f.dx();
  auto rho = interpolate_cells(f.x, f.rho, 1, xs);
  auto u1 = interpolate_cells(f.x, f.u1, 1, xs);
  auto u2 = interpolate_cells(f.x, f.u2, 1, xs);
  auto u3 = interpolate_cells(f.x, f.u3, -1, xs);
  auto T = interpolate_cells(f.x, f.T, 1, xs);
  auto drho = interpolate_cells(f.x, fd_derivative(f.rho, dx), -1, xs);
  auto du1 = interpolate_cells(f.x, fd_derivative(f.u1, dx), -1, xs);
  auto du2 = interpolate_cells(f.x, fd_derivative(f.u2, dx), -1, xs);
  auto du3 = interpolate_cells(f.x, fd_derivative(f.u3, dx), 1, xs);
  auto dT = interpolate_cells(f.x, fd_derivative(f.T, dx), -1, xs);
  const EulerRates r = euler_time_derivative(f);
  auto rr = interpolate_cells(f.x, r.rho, 1, xs);
  auto r1 = interpolate_cells(f.x, r.u1, 1, xs);
  auto r2 = interpolate_cells(f.x, r.u2, 1, xs);
  auto r3 = interpolate_cells(f.x, r.u3, -1, xs);
  auto rT = interpolate_cells(f.x, r.T, 1, xs);
  std::vector<EulerPoint> out(xs.size());
  for (size_t q = 0; q < xs.size(); ++q) {
    out[q].x = xs[q];
    out[q].drho_dt = rr[q];
    out[q].du_dt = Vec3(r1[q], r2[q], r3[q]);
    out[q].dT_dt = rT[q];
    out[q].s = FluidState{rho[q], Vec3(u1[q], u2[q], u3[q]), T[q]};
    out[q].du = Vec3(du1[q], du2[q], du3[q]);
    out[q].drho = drho[q];
    out[q].dT = dT[q];
  }
  return out;
}

std::vector<Conserved> euler_conserved(const EulerField& f) {
  std::vector<Conserved> U(f.nx());
  for (int i = 0; i < f.nx(); ++i) U[i] = to_conserved(f.rho[i], f.u1[i], f.u2[i], f.u3[i], f.T[i]);
  return U;
}

void euler_assign(EulerField& f, const std::vector<Conserved>& U) {
  for (int i = 0; i < f.nx(); ++i) {
    to_primitive(U[i], f.rho[i], f.u1[i], f.u2[i], f.u3[i], f.T[i]);
    if (!(f.rho[i] > 0.0) || !(f.T[i] > 0.0))
      throw std::domain_error("euler: positivity lost (smooth solution broke down)");
  }
}

std::vector<Conserved> euler_rhs(const std::vector<Conserved>& U, double dx) { return rhs_impl(U, dx); }

void write_euler_csv(const EulerField& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "x3,rho,u1,u2,u3,T\n" << std::setprecision(17);
  for (int i = 0; i < f.nx(); ++i)
    os << f.x[i] << ',' << f.rho[i] << ',' << f.u1[i] << ',' << f.u2[i] << ',' << f.u3[i] << ',' << f.T[i] << '\n';
}

}  // namespace kn
