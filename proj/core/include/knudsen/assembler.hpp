#pragma once

#include "knudsen/interior_expansion.hpp"
#include "knudsen/knudsen_layer.hpp"

#include <string>
#include <vector>

namespace kn {

struct LayerSettings {
  double xi_max = 20.0;
  int cells = 64;
  double stretch = 1.05;
  double sigma0 = 0.95;
  LayerBvpOptions bvp;
};

// Boundary layers at one sample time; profiles are f = F / sqrt(M0) on the
// layer points {0, cell centres}.
struct LayerSample {
  FluidState s0;
  WallMaxwellian wall;
  LayerProfile f1;        // f^bb_1 (its fluid part vanishes)
  LayerProfile f2_fluid;  // explicit part from the fluid-valued source
  LayerProfile f2;        // full second layer
  LayerBvpResult bvp1, bvp2;
  double solvability1 = 0.0, solvability2 = 0.0;  // data flux before any adjustment
  double lemma_defect = 0.0;                       // relative, k = 2
};

struct ExpansionBundle {
  VelocityGrid grid;
  InteriorExpansion interior;
  LayerGrid layer_grid;
  std::vector<LayerSample> layers;  // one per sample time

  int samples() const { return interior.samples(); }
  // F^bb_k = sqrt(M0) f^bb_k at sample m and xi, k in {1, 2}
  Vec layer_F(int k, int m, double xi) const;
};

struct LayerSourceTerms {
  Mat S1;  // fluid-valued part, N x points
  Mat S2;  // part orthogonal to the null space of L0
};

// Taylor coefficients d^l/dx^l at the wall, l = 0..order, of the columns of
// F on the interior nodes; column l of the result.
Mat wall_taylor(const Mat& F, const std::vector<double>& x, int order);

// Sources of the k-th layer problem at sample m (k = 1 gives zeros). For
// k = 2 the first layer must already be stored in b.
LayerSourceTerms layer_sources(const CollisionModel& Q, int k, const ExpansionBundle& b, int m);

// Solves both layer problems at every sample; the interior part must be set.
void build_layers(const CollisionModel& Q, ExpansionBundle& b, const LayerSettings& s);

ExpansionBundle build_bundle(const CollisionModel& Q, const InteriorExpansion& interior, const LayerSettings& s);

// M + sum_k eps^k (F_k + F^bb_k(x/eps)) on the interior nodes at sample m;
// eps = 0 returns M.
Mat assemble_ansatz(const ExpansionBundle& b, int m, double eps);
// The same at one node and arbitrary t (four-point Lagrange over samples).
Vec ansatz_at(const ExpansionBundle& b, double t, double eps, int node);
// Wall (matched) state at arbitrary t.
FluidState wall_state_at(const ExpansionBundle& b, double t);

struct RemainderForcings {
  Mat R;           // interior forcing on the nodes
  Mat Rbb;         // layer forcing with the probe point at xi/2
  Mat Rbb_lo, Rbb_hi;  // elementwise hull over probe points xi/4, xi/2, 3xi/4
};

// Both forcings at sample m on the interior nodes (xi = x / eps). Products
// B(a, b) + B(b, a) are the second variation of the collision model at M0
// (layer terms) or at M (interior term).
RemainderForcings remainder_forcings(const CollisionModel& Q, const ExpansionBundle& b, int m, double eps);

// Single-file archive of the bundle (all fields and the grid parameters).
void save_bundle(const ExpansionBundle& b, const std::string& path);
ExpansionBundle load_bundle(const std::string& path);

}  // namespace kn
