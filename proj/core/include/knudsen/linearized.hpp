#pragma once

#include "knudsen/velocity_grid.hpp"

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kn {

// Linearized hard-sphere operator for the standard Maxwellian, as a dense
// symmetric matrix acting on g = f / sqrt(M) variables (node weights are
// uniform, so the Euclidean transpose is the L2_v adjoint).
class LinearizedKernel {
 public:
  // Dense quadrature of -(1/sqrt M){B(M, sqrt M g) + B(sqrt M g, M)} with the
  // same interpolation rules as bilinear_collision_raw. Not symmetrized.
  static Mat assemble_raw(const VelocityGrid& g);
  // Symmetrized and projected onto the complement of the null space.
  static LinearizedKernel assemble(const VelocityGrid& g);
  // Reads the cache when its key matches the grid, otherwise assembles and
  // rewrites it. An empty path disables caching.
  static LinearizedKernel load_or_assemble(const VelocityGrid& g, const std::string& cache_path);

  static std::optional<LinearizedKernel> load(const std::string& path, const VelocityGrid& g);
  void save(const std::string& path) const;

  const Mat& matrix() const { return L_; }
  const Vec& nu() const { return nu_; }
  // Moore-Penrose inverse, computed on first use.
  const Mat& pinv() const;
  void check_grid(const VelocityGrid& g) const;  // throws on mismatch
  int n() const { return n_; }
  double vmax() const { return vmax_; }
  int n_sphere() const { return n_sphere_; }

 private:
  int n_ = 0;
  double vmax_ = 0.0;
  int n_sphere_ = 0;
  Mat L_;
  Vec nu_;
  mutable std::shared_ptr<Mat> pinv_;
};

// Similarity map to a local state s = (rho, u, T). Reference node w_k is sent
// to x_k = u + sqrt(T) w_k; I takes grid values psi to values at x_k by
// interpolating the ratio psi / sqrt(M_s) and multiplying back. The local
// operator is L_s = rho T^2 I^T L_ref I.
class StateMap {
 public:
  StateMap(const VelocityGrid& g, const FluidState& s);
  void forward(const double* psi, double* out) const;      // I
  void adjoint(const double* y, double* out) const;        // I^T
  void inverse(const double* y, double* out) const;        // I^{-1}
  void inverse_adjoint(const double* z, double* out) const;  // I^{-T}
  double amplitude() const { return amp_; }
  const FluidState& state() const { return s_; }

 private:
  void tensor(const Mat* A, const double* in, double* out, bool transpose) const;
  int n_;
  FluidState s_;
  double amp_;
  Vec in_scale_, out_scale_;
  Mat A_[3], Ainv_[3];
};

// L_s applied to each column of G (state per column).
Mat apply_L(const LinearizedKernel& K, const VelocityGrid& g, const std::vector<StateMap>& maps, const Mat& G);
Mat apply_L(const LinearizedKernel& K, const VelocityGrid& g, const StateMap& map, const Mat& G);
Vec linearized_L(const Vec& gvec, const FluidState& s, const LinearizedKernel& K, const VelocityGrid& g);

struct PinvOptions {
  double rtol = 1e-10;
  int max_iter = 500;
  double solvability_tol = 1e-8;
};

// Solves L_s g = h on the complement of N_s for each column, with a projected
// preconditioned conjugate gradient run in lockstep over the columns.
Mat pseudo_inverse_L(const LinearizedKernel& K, const VelocityGrid& g, const std::vector<StateMap>& maps,
                     const Mat& H, const PinvOptions& opt = {});
Vec pseudo_inverse_L(const Vec& h, const FluidState& s, const LinearizedKernel& K, const VelocityGrid& g,
                     const PinvOptions& opt = {});

// Dense L_s (N x N); intended for small grids.
Mat dense_L(const LinearizedKernel& K, const VelocityGrid& g, const FluidState& s);

// Largest c with <L g, g> >= c ||(I-P) g||_nu^2, from a generalized dense
// eigenproblem on the complement of the null space.
double estimate_c0(const FluidState& s, const LinearizedKernel& K, const VelocityGrid& g);

// Collision model used by the direct solver and, through its variations, by
// the expansion: Q(F) = -sqrt(M_F) L_{s_F}((F - M_F)/sqrt(M_F)) with s_F the
// state matching the conserved moments of F. Its first variation at a
// Maxwellian is the linearized operator; second variations stand in for the
// quadratic collision terms.
class CollisionModel {
 public:
  CollisionModel(const VelocityGrid& g, std::shared_ptr<const LinearizedKernel> K);
  Mat apply(const Mat& F, std::vector<FluidState>* states = nullptr) const;
  Vec apply(const Vec& F) const;
  // Q''(M)[a,a]/2, i.e. the analogue of B(a,a)
  Mat quadratic(const Mat& M, const Mat& A, double delta = 1e-4) const;
  // Q''(M)[a,b], the analogue of B(a,b) + B(b,a)
  Mat mixed(const Mat& M, const Mat& A, const Mat& B, double delta = 1e-4) const;
  // -sqrt(M) L_s(a / sqrt(M)) columnwise, with s the state of each column of M
  Mat linear(const Mat& M, const Mat& A) const;
  const VelocityGrid& grid() const { return g_; }
  const LinearizedKernel& kernel() const { return *K_; }

 private:
  VelocityGrid g_;
  std::shared_ptr<const LinearizedKernel> K_;
};

}  // namespace kn
