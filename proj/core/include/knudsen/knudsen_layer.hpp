#pragma once

#include "knudsen/linearized.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace kn {

// The wall is x3 = 0 with outward normal n = -e3: incoming velocities have
// v3 > 0, outgoing v3 < 0.

struct WallMaxwellian {
  Vec3 u = Vec3::Zero();
  double T = 1.0;
  double rho_w = 0.0;           // closed-form normalization
  double rho_w_discrete = 0.0;  // after the discrete rescale
  Vec values;                   // M_w on the grid
};

// rho_w making the incoming flux of M_w equal to one.
double wall_density(const Vec3& u_w, double T_w);
WallMaxwellian wall_maxwellian(const Vec3& u_w, double T_w, const VelocityGrid& g);
// sum over v3 > 0 of v3 M_w w
double incoming_flux(const VelocityGrid& g, const Vec& F);
// sum over v3 < 0 of |v3| F w
double outgoing_flux(const VelocityGrid& g, const Vec& F);

// D_w f = (M_w / sqrt M0) sum_{v3<0} |v3| f sqrt(M0) w, on all velocities; only
// the outgoing values of f are read.
Vec diffusive_Dw(const Vec& f, const WallMaxwellian& wall, const Vec& sqrtM0, const VelocityGrid& g);

// Stretched layer grid: faces 0 = xi_0 < ... < xi_N = xi_max with geometric
// ratio, unknowns at cell centres; points() = {0, centres}.
struct LayerGrid {
  std::vector<double> faces;
  std::vector<double> centres;
  double sigma0 = 0.95;
  int cells() const { return static_cast<int>(centres.size()); }
  std::vector<double> points() const;
  double first_spacing() const { return faces[1] - faces[0]; }
};
// Throws unless the first spacing is <= 0.05.
LayerGrid make_layer_grid(double xi_max, int cells, double ratio, double sigma0 = 0.95);

// Values on LayerGrid::points(): column 0 is the wall trace.
struct LayerProfile {
  std::vector<double> xi;
  Mat f;  // N x points
  Vec at(double xi_value) const;  // linear interpolation, zero beyond the grid
};

// Coefficients of the fluid part of a layer, one value per point.
struct FluidLayerCoefficients {
  std::vector<double> Psi, Phi1, Phi2, Phi3, Theta;
};

// Source in N0 written as {a + b.(v-u0) + c |v-u0|^2} sqrt(M0), one value per
// point. Integrals to infinity use the grid and an exponential tail fitted to
// the last points; throws std::domain_error on non-decaying input.
FluidLayerCoefficients fluid_layer_coefficients(const std::vector<double>& xi, const std::vector<double>& a,
                                                const std::vector<std::array<double, 3>>& b,
                                                const std::vector<double>& c, double T0);
// Same with the coefficients given as functions of xi.
FluidLayerCoefficients fluid_layer_coefficients(const std::vector<double>& xi,
                                                const std::function<double(double)>& a,
                                                const std::function<std::array<double, 3>(double)>& b,
                                                const std::function<double(double)>& c, double T0);
LayerProfile fluid_layer_part(const std::vector<double>& xi, const FluidLayerCoefficients& co, const FluidState& s0,
                              const VelocityGrid& g);
// (a, b, c) of a field in N0 (columns), by least squares on the discrete basis.
void null_coefficients(const Mat& S, const FluidState& s0, const VelocityGrid& g, std::vector<double>& a,
                       std::vector<std::array<double, 3>>& b, std::vector<double>& c);

// int (v.n) (f_k + f_k1^bb) sqrt(M0) dv at the wall.
double solvability_residual(const Vec& fk_trace, const Vec& fbb1_trace, const Vec& sqrtM0, const VelocityGrid& g);

// T0 (Psi1 + 5 T0 Theta1) - (1/rho0) <(v.n) sqrt(M0), k1>, k1 the kinetic part
// of f1 at the wall.
double boundary_functional_J(const VelocityGrid& g, const FluidState& s0, const Vec& k1_wall, double Psi1,
                             double Theta1);

struct LayerBvpOptions {
  double rtol = 1e-11;
  int restart = 60;
  int max_iter = 600;
  double solvability_tol = 1e-8;  // relative; larger values are adjusted and reported
};

struct LayerBvpResult {
  LayerProfile profile;
  double residual = 0.0;            // relative residual of the discrete system
  int iterations = 0;
  double solvability_before = 0.0;  // incoming flux of the data (absolute)
  double adjustment = 0.0;          // multiple of M_w/sqrt(M0) removed from the data
  double flux_deviation = 0.0;      // max over faces of |mass flux|
  double far_state = 0.0;           // sup of the fluid state removed at xi_max
  Vec data_used;                    // boundary data the returned profile satisfies
};

// Upwind finite volumes for v3 d_xi f + L0 f = S on the cells, with
// f|_{v3>0}(0) = D_w f(0) + data and specular reflection at xi_max, solved
// with restarted GMRES (two-level preconditioner: coarse fluid/Chapman-Enskog
// correction plus a transport sweep). The fluid state the truncated solution
// tends to is removed afterwards, which shifts the data by (I - D_w) of it.
LayerBvpResult solve_layer_bvp(const Mat& source_cells, const Vec& data, const WallMaxwellian& wall,
                               const FluidState& s0, const LinearizedKernel& K, const VelocityGrid& g,
                               const LayerGrid& grid, const LayerBvpOptions& opt = {});

// Residual of the discrete layer system for a given profile (same operator
// as the solver), relative to the right-hand side.
double layer_bvp_residual(const LayerProfile& p, const Mat& source_cells, const Vec& data, const WallMaxwellian& wall,
                          const FluidState& s0, const LinearizedKernel& K, const VelocityGrid& g,
                          const LayerGrid& grid);

// Mass flux sum v3 f sqrt(M0) w at each face of the grid, from the upwind
// face values.
std::vector<double> layer_face_fluxes(const LayerProfile& p, const Vec& data, const WallMaxwellian& wall,
                                      const Vec& sqrtM0, const VelocityGrid& g, const LayerGrid& grid);

struct LeadingLayerCheck {
  double sup_residual = 0.0;  // sup |R| with R = (M_w/sqrt M0) int |v.n| M0 - sqrt M0 over v3 > 0
  double sup_sqrtM0 = 0.0;
  double solvability = 0.0;   // sum_{v3>0} v3 R sqrt(M0) w
};
LeadingLayerCheck verify_leading_layer_vanishes(const FluidState& s0, const WallMaxwellian& wall,
                                                const VelocityGrid& g);

// Exponential decay rate of sup_v |f| over the interior points (least squares
// on log values where the profile is above a floor).
double fit_decay_rate(const LayerProfile& p);
// The same for sup_v weight(v) |f|.
double fit_decay_rate(const LayerProfile& p, const Vec& weight);
// <v>^beta M0^{-a} on the grid
Vec layer_weight(const VelocityGrid& g, const FluidState& s0, double a = 0.125, double beta = 3.0);

void write_layer_csv(const LayerProfile& p, const VelocityGrid& g, const Vec& sqrtM0, const std::string& path);

}  // namespace kn
