#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace kn {

using Vec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using Mat = Eigen::MatrixXd;

struct FluidState {
  double rho = 1.0;
  Vec3 u = Vec3::Zero();
  double T = 1.0;

  void validate() const;  // throws std::invalid_argument unless rho > 0, T > 0
};

// Uniform Cartesian velocity grid on [-vmax, vmax]^3 with midpoint weights,
// plus a product quadrature on the unit sphere. Node k = (i*n + j)*n + l has
// velocity (axis[i], axis[j], axis[l]).
struct VelocityGrid {
  int n = 0;
  double vmax = 0.0;
  double h = 0.0;
  double w = 0.0;  // cell volume h^3, the weight of every node
  int n_sphere = 0;
  std::vector<double> axis;
  Vec vx, vy, vz;
  std::vector<Vec3> sphere_nodes;
  std::vector<double> sphere_weights;

  int size() const { return n * n * n; }
  Vec3 node(int k) const { return {vx[k], vy[k], vz[k]}; }
  int index(int i, int j, int l) const { return (i * n + j) * n + l; }
  // index of -v
  int mirror(int k) const;
  // index of (v1, v2, -v3)
  int reflect3(int k) const;
  Vec weights() const { return Vec::Constant(size(), w); }
  bool same_as(const VelocityGrid& o) const {
    return n == o.n && vmax == o.vmax && n_sphere == o.n_sphere;
  }
};

// n_per_axis even and >= 2; n_sphere = polar * azimuth with an even azimuth
// count (the polar count is the largest divisor not above sqrt(n_sphere/2)).
VelocityGrid build_grid(int n_per_axis, double v_max, int n_sphere);

Vec maxwellian(const VelocityGrid& g, const FluidState& s);
Vec sqrt_maxwellian(const VelocityGrid& g, const FluidState& s);
double maxwellian_at(const Vec3& v, const FluidState& s);

// Polynomial weight for moment(). Kinds follow the supported list: 1, v_i,
// |v|^2, (v-u)_i, |v-u|^2, and an arbitrary user polynomial (degree <= 4 is the
// documented contract; it is not checked).
struct Weight {
  enum class Kind { One, V, V2, Rel, Rel2, User };
  Kind kind = Kind::One;
  int component = 0;
  Vec3 u = Vec3::Zero();
  std::function<double(const Vec3&)> poly;

  static Weight one() { return {}; }
  static Weight v(int i) { Weight w; w.kind = Kind::V; w.component = i; return w; }
  static Weight v2() { Weight w; w.kind = Kind::V2; return w; }
  static Weight rel(int i, const Vec3& u) { Weight w; w.kind = Kind::Rel; w.component = i; w.u = u; return w; }
  static Weight rel2(const Vec3& u) { Weight w; w.kind = Kind::Rel2; w.u = u; return w; }
  static Weight user(std::function<double(const Vec3&)> p) { Weight w; w.kind = Kind::User; w.poly = std::move(p); return w; }
  double operator()(const Vec3& v) const;
};

double moment(const VelocityGrid& g, const Vec& F, const Weight& phi);
// (mass, momentum_1..3, energy |v|^2/2) as a 5-vector
Eigen::Matrix<double, 5, 1> conserved_moments(const VelocityGrid& g, const Vec& F);

// Fluid state whose discrete Maxwellian reproduces the given conserved moments
// exactly (Newton iteration on the quadrature moments).
FluidState match_moments(const VelocityGrid& g, const Eigen::Matrix<double, 5, 1>& m,
                         const FluidState* guess = nullptr);

// Discrete null space {1, (v-u), |v-u|^2} * sqrt(M) and the orthogonal
// projection onto it.
class NullSpace {
 public:
  NullSpace(const VelocityGrid& g, const FluidState& s);
  Vec project(const Vec& f) const;
  Vec complement(const Vec& f) const { return f - project(f); }
  void project_columns(Mat& F) const;     // in place, P
  void complement_columns(Mat& F) const;  // in place, I - P
  const Mat& basis() const { return E_; }  // the five raw basis vectors
  const Mat& orthonormal() const { return Q_; }

 private:
  Mat E_;
  Mat Q_;
};

// The five raw null-space functions of L at state s, normalized as
// (1/sqrt(rho)) sqrt(M), ((v_i-u_i)/sqrt(rho T)) sqrt(M),
// (1/sqrt(6 rho)) (|v-u|^2/T - 3) sqrt(M).
Mat null_basis(const VelocityGrid& g, const FluidState& s);

}  // namespace kn
