#pragma once

#include "knudsen/velocity_grid.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace kn {

// Primitive fields on cell centres x_i = (i + 1/2) dx of [0, xmax]; the wall
// is x3 = 0 and only x3-dependence is kept.
struct EulerField {
  double t = 0.0;
  double xmax = 0.0;
  std::vector<double> x;
  std::vector<double> rho, u1, u2, u3, T;

  int nx() const { return static_cast<int>(x.size()); }
  double dx() const { return xmax / nx(); }
  FluidState at(int i) const { return {rho[i], Vec3(u1[i], u2[i], u3[i]), T[i]}; }
  double mass() const;
};

// Initial profile with analytic values and x3-derivatives of (rho, u1, u2, u3, T).
struct ManufacturedProfile {
  std::string id;
  double amplitude = 0.0;
  std::function<std::array<double, 5>(double)> value;
  std::function<std::array<double, 5>(double)> derivative;
};

// With b(x) = exp(-(x-1)^2/0.1) + exp(-(x+1)^2/0.1) (even about the wall):
// "gauss-density": rho = 1 + a b(x), u = 0, T = 1
// "tangential-shear": u1 = a b(x), rho = T = 1
// "uniform": (1, 0, 1)
ManufacturedProfile manufactured_profile(const std::string& id, double amplitude);
EulerField manufactured_state(const ManufacturedProfile& p, int nx, double xmax);
EulerField manufactured_state(const std::string& id, double amplitude, int nx, double xmax);

struct EulerBounds {
  double rho_lo = 0.0, rho_hi = 1e300, T_lo = 0.0, T_hi = 1e300;
  static EulerBounds from(const EulerField& f);  // (min/2, 2 max) of the data
};

double euler_max_speed(const EulerField& f);
double euler_stable_dt(const EulerField& f, double cfl);

// One SSP-RK3 step of the MUSCL / local Lax-Friedrichs finite-volume scheme.
// Throws when dt breaks the CFL bound or positivity is lost.
EulerField advance_euler(const EulerField& f, double dt, double cfl = 0.9, const EulerBounds* bounds = nullptr);

struct EulerRates {
  std::vector<double> rho, u1, u2, u3, T;
};
// Time derivatives from the PDE right-hand side (primitive form) with
// fourth-order spatial differences.
EulerRates euler_time_derivative(const EulerField& f);

// Solves to each requested time (ascending, first may be 0) and returns the
// snapshots; steps are shortened to land on the sample times.
std::vector<EulerField> run_euler(const EulerField& init, double cfl, const std::vector<double>& times);

// Smooth evaluation of a snapshot off the cell centres: 6-point Lagrange
// interpolation with even/odd mirror ghosts at the wall.
struct EulerPoint {
  double x = 0.0;
  FluidState s;
  Vec3 du = Vec3::Zero();  // d/dx3 of u
  double drho = 0.0, dT = 0.0;
  // time derivatives from the PDE right-hand side
  Vec3 du_dt = Vec3::Zero();
  double drho_dt = 0.0, dT_dt = 0.0;
};
std::vector<EulerPoint> sample_euler(const EulerField& f, const std::vector<double>& xs);

// Interpolate cell data (with wall parity +1 even / -1 odd) to points xs.
std::vector<double> interpolate_cells(const std::vector<double>& x, const std::vector<double>& v, int parity,
                                      const std::vector<double>& xs);

// Low-level access to the finite-volume scheme, used by solvers that march
// alongside the Euler system.
using Conserved = std::array<double, 5>;
std::vector<Conserved> euler_conserved(const EulerField& f);
// Overwrites the primitive fields of f; throws if positivity is lost.
void euler_assign(EulerField& f, const std::vector<Conserved>& U);
// Semi-discrete right-hand side -dF/dx of the scheme (wall mirror, far copy).
std::vector<Conserved> euler_rhs(const std::vector<Conserved>& U, double dx);

void write_euler_csv(const EulerField& f, const std::string& path);

}  // namespace kn
