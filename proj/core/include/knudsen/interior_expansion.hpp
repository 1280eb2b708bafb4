#pragma once

#include "knudsen/euler.hpp"
#include "knudsen/linearized.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace kn {

// Fluid variables (rho1, u1, theta1) of the first correction; theta1 is three
// times the temperature perturbation.
struct CorrectionField {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> rho1, u1_1, u1_2, u1_3, theta1;
  int nx() const { return static_cast<int>(x.size()); }
};

CorrectionField zero_correction(const EulerField& like);
// "zero", or "gauss-velocity": u1_1 = a (exp(-(x-1)^2/0.1) + exp(-(x+1)^2/0.1)) (tangential, so it
// is compatible with a vanishing wall value)
CorrectionField correction_profile(const std::string& id, double amplitude, const EulerField& like);

// Cell data to arbitrary points; u1_3 is interpolated as an odd function
// about its wall value u3_wall.
CorrectionField sample_correction(const CorrectionField& c, const std::vector<double>& xs, double u3_wall);

// Nodes x_j = j xmax / nx, j = 0..nx; node 0 is the wall.
std::vector<double> slab_nodes(int nx, double xmax);

// (d_t + v d_x) M / sqrt(M) per point, with the Euler rates for d_t.
Mat maxwellian_transport(const VelocityGrid& g, const std::vector<EulerPoint>& pts);

struct KineticPart {
  Mat k1;                             // (I - P) f1 per point
  double solvability_residual = 0.0;  // max |P h| / max(|h|, |v3 d_x M / sqrt M|)
};

// (I - P) f1 = -L^{-1}((d_t + v d_x) M / sqrt M); the right-hand side is
// A_i3 d3 u_i + B_3 d3 T / sqrt(T) and its fluid projection must vanish.
KineticPart kinetic_part_f1(const VelocityGrid& g, const LinearizedKernel& K, const std::vector<EulerPoint>& pts,
                            double solvability_tol = 1e-4, const PinvOptions& opt = {});

// Moments of the kinetic part, per point:
//   tau_i = <T A_i3, k>, q = <T^{3/2} B_3, k>,
//   sigma_theta = 2 T^{3/2} <B_3, k> + 2 T u . <A_.3, k>.
struct FluxMoments {
  std::vector<double> tau1, tau2, tau3, q, stheta;
  int size() const { return static_cast<int>(tau1.size()); }
};
FluxMoments flux_moments(const VelocityGrid& g, const std::vector<EulerPoint>& pts, const Mat& k1);

struct PerpSources {
  std::vector<double> Fu1, Fu2, Fu3, Ftheta;
};
// F_u,i = -d3 tau_i, F_theta = -d3 sigma_theta - 2 u . F_u on uniform points.
PerpSources perp_sources(const FluxMoments& m, const std::vector<EulerPoint>& pts, double dx);

// Kinetic fluxes of the conservative correction system tabulated on points at
// the sample times: (tau1, tau2, tau3, q + u . tau).
class FluxTable {
 public:
  FluxTable() = default;
  FluxTable(std::vector<double> times, std::vector<double> x);
  void set(int m, const std::vector<EulerPoint>& pts, const FluxMoments& f);
  std::array<std::vector<double>, 4> eval(double t, const std::vector<double>& xs) const;
  bool empty() const { return times_.empty(); }

 private:
  std::vector<double> times_, x_;
  std::vector<std::array<std::vector<double>, 4>> data_;
};

struct HyperbolicResult {
  std::vector<EulerField> euler;  // at the requested times
  std::vector<CorrectionField> correction;
};

// Marches Euler and the linear correction system together. The correction is
// advanced in conservative perturbation form (d_t U1 + d_3(F'(U) U1 + S) = 0,
// S the tabulated kinetic fluxes) with the same MUSCL / Lax-Friedrichs scheme
// as Euler. bc_J gives u1 . n at the wall (n = -e3) and is imposed through the
// mirror ghost u1_3 -> -2 J - u1_3; other variables are reflected evenly.
HyperbolicResult solve_linear_hyperbolic(const EulerField& init, double cfl, const std::vector<double>& times,
                                         const FluxTable& sources, const std::function<double(double)>& bc_J,
                                         const CorrectionField& ic, double compat_tol = 1e-8);

// M [rho1/rho + u1.(v-u)/T + theta1/(6T)(|v-u|^2/T - 3)] per point
Mat fluid_part_f1(const VelocityGrid& g, const std::vector<EulerPoint>& pts, const CorrectionField& c);

// (d_t + v_3 d_x) F at sample m, by fourth-order differences over the sample
// times and the uniform points.
Mat transport_of(const VelocityGrid& g, const std::vector<Mat>& F, int m, double dt, double dx);

// x-derivatives 0..order at z of a field given by one column per point xs,
// from the npts nearest points; column d of the result is the d-th derivative.
Mat x_derivatives(const Mat& F, const std::vector<double>& xs, double z, int order, int npts = 7);

enum class GSign { Hierarchy, Flipped };

struct InteriorOptions {
  GSign sign = GSign::Hierarchy;
  double f1_solvability_tol = 1e-4;  // the residual is Euler discretization error
  double f2_solvability_tol = 0.2;  // relative fluid part of the F2 right-hand side
  double fd_delta = 1e-4;
  PinvOptions pinv;
};

// (I - P) f2 from F1 at one sample; returns F2 = sqrt(M) f2. The hierarchy
// sign solves L f2 = (Q''[F1,F1]/2 - (d_t + v d_x) F1) / sqrt M, the flipped
// one L f2 = -((d_t + v d_x) F1 + Q''[F1,F1]/2) / sqrt M.
Mat kinetic_part_f2(const CollisionModel& Q, const Mat& M, const Mat& F1, const Mat& transportF1,
                    const InteriorOptions& opt, double* solvability = nullptr);

struct InteriorInputs {
  EulerField euler_init;
  double euler_cfl = 0.4;
  CorrectionField correction_ic;  // on the Euler cells; empty means zero
  std::vector<double> times;      // uniform, starting at 0
  std::vector<double> x;          // uniform slab nodes, x[0] = 0
};

// Interior terms on the slab nodes at the sample times.
struct InteriorExpansion {
  std::vector<double> times, x;
  double dx = 0.0, dt = 0.0;
  std::vector<std::vector<EulerPoint>> pts;
  std::vector<CorrectionField> corr;  // on the nodes
  std::vector<Mat> M, F1, F2, k1;     // N x nodes
  std::vector<double> J;              // wall value u1 . n per sample
  double f1_solvability = 0.0, f2_solvability = 0.0;
  int nodes() const { return static_cast<int>(x.size()); }
  int samples() const { return static_cast<int>(times.size()); }
};

InteriorExpansion build_interior(const CollisionModel& Q, const InteriorInputs& in, const InteriorOptions& opt,
                                 HyperbolicResult* trajectory = nullptr);

struct HierarchyResiduals {
  double order0 = 0.0;  // rms of P((d_t + v d_x) M / sqrt M)
  double order1 = 0.0;  // rms of ((d_t + v d_x) F1 - Q'(M) F2 - Q''(M)[F1,F1]/2) / sqrt M
};
// Derivatives by finite differences over samples and nodes; root mean square
// over all samples and nodes of the L2_v norms.
HierarchyResiduals hierarchy_residuals(const CollisionModel& Q, const InteriorExpansion& ex, const InteriorOptions& opt);

void write_correction_csv(const CorrectionField& c, const std::string& path);

}  // namespace kn
