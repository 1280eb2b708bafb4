#pragma once

#include "knudsen/assembler.hpp"

#include <functional>
#include <string>
#include <vector>

namespace kn {

// Distribution on the slab nodes; x[0] = 0 is the wall unless periodic.
struct KineticState {
  double t = 0.0;
  double eps = 0.0;
  std::vector<double> x;
  Mat F;  // N x nodes
  double mass(const VelocityGrid& g, bool periodic = false) const;
};

// Trapezoid weights on the nodes (uniform weights when periodic).
std::vector<double> node_weights(const std::vector<double>& x, bool periodic = false);

// Sets the incoming (v3 > 0) wall values of F to M_w times the outgoing flux.
void apply_diffuse_bc(Eigen::Ref<Vec> F, const WallMaxwellian& wall, const VelocityGrid& g);
// sum v3 F w over all velocities
double wall_mass_flux(const Vec& F, const VelocityGrid& g);

struct SlabOptions {
  double cfl = 0.5;
  double clip_tol = 1e-10;  // allowed clipped mass relative to the total
  bool periodic = false;
};

struct StepStats {
  int steps = 0;
  double clipped_mass = 0.0;
};

// Method of lines for d_t F + v3 d_x F = Q(F) / eps: upwind-biased fifth-order
// differences (lower order in the last three nodes at each end) and classical
// RK4. The collision term is the CollisionModel. With a wall, node 0 takes
// the diffuse reflection from the wall state and the last node is Dirichlet.
class BoltzmannSlab {
 public:
  using WallState = std::function<FluidState(double)>;
  using FarValues = std::function<Vec(double)>;

  BoltzmannSlab(const CollisionModel& Q, std::vector<double> x, double eps, SlabOptions opt = {});

  void set_wall(WallState w) { wall_ = std::move(w); }
  void set_far(FarValues f) { far_ = std::move(f); }

  // Largest stable step for state F.
  double max_dt(const Mat& F) const;
  // Boundary nodes overwritten at time t.
  void impose_boundary(Mat& F, double t) const;
  // Right-hand side; zero in the entries fixed by the boundary conditions.
  Mat rhs(const Mat& F) const;
  // One RK4 step; throws if dt exceeds max_dt or the clip tolerance is hit.
  void step(KineticState& s, double dt, StepStats* stats = nullptr) const;
  // Equal steps landing on t_end.
  void advance_to(KineticState& s, double t_end, StepStats* stats = nullptr) const;

  const std::vector<double>& x() const { return x_; }
  double eps() const { return eps_; }
  bool periodic() const { return opt_.periodic; }
  // spectral radius of the reference linearized operator
  double stiffness() const { return lambda_; }

 private:
  struct Stencil {
    int start = 0;
    std::vector<double> w;
  };
  const CollisionModel& Q_;
  std::vector<double> x_;
  double eps_;
  SlabOptions opt_;
  WallState wall_;
  FarValues far_;
  std::vector<Stencil> pos_, neg_;
  double dx_min_ = 0.0;
  double lambda_ = 0.0;
};

struct NormRecord {
  double t = 0.0, mass = 0.0, l2_f = 0.0, linf_h = 0.0, boundary_residual = 0.0;
};

// l and T_M of the weighted norms plus the per-step log.
struct NormMonitor {
  int ell = 7;
  double T_M = 0.0;
  std::vector<NormRecord> records;

  // T_M = 0.75 max T
  static NormMonitor from_max_temperature(double maxT, int ell = 7);
  // throws std::runtime_error unless T_M < maxT < 2 T_M
  void check(double maxT) const;
  void record(const NormRecord& r) { records.push_back(r); }
  void write_csv(const std::string& path) const;
};

struct FieldNorms {
  double l2 = 0.0;    // || G / sqrt(M) ||_2 over x and v
  double linf = 0.0;  // || <v>^l G / sqrt(M_M) ||_inf, M_M = M(1, 0, T_M)
};
FieldNorms field_norms(const VelocityGrid& g, const std::vector<double>& x, const Mat& G, const Mat& M,
                       const NormMonitor& mon, bool periodic = false);

struct WeightedNorms {
  double l2_f = 0.0, linf_h = 0.0;
  double combined = 0.0;  // l2_f + eps^{3/2} linf_h
};
// F_R = (F - F_approx) / eps^2.
WeightedNorms weighted_norms(const VelocityGrid& g, const std::vector<double>& x, const Mat& F, const Mat& F_approx,
                             const Mat& M, double eps, const NormMonitor& mon);

// C1 = min M / M_M and C2 = max M / M_M^z over the grid.
struct MaxwellianBounds {
  double C1 = 0.0, C2 = 0.0;
};
MaxwellianBounds maxwellian_bounds(const VelocityGrid& g, const Mat& M, double T_M, double z);

// Wall identity -1/2 sum v3 f^2 w = 1/2 sum_{v3<0} |v3| ((I - D_w) f)^2 w for a
// trace f = F / sqrt(M0). B2 is the cross term <D_w f, (I - D_w) f> over the
// outgoing half, bc_defect the sup of (f - D_w f) over v3 > 0.
struct DissipationCheck {
  double lhs = 0.0, rhs = 0.0, residual = 0.0, B2 = 0.0, bc_defect = 0.0;
};
DissipationCheck boundary_dissipation(const Vec& f, const WallMaxwellian& wall, const Vec& sqrtM0,
                                      const VelocityGrid& g);
// The same, throwing std::invalid_argument when bc_defect exceeds
// bc_tol * sup |f|.
DissipationCheck boundary_dissipation_check(const Vec& f, const WallMaxwellian& wall, const Vec& sqrtM0,
                                            const VelocityGrid& g, double bc_tol = 1e-10);

}  // namespace kn
