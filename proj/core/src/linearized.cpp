#include "knudsen/linearized.hpp"

#include "knudsen/collision.hpp"
#include "knudsen/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace kn {

namespace {

constexpr char kMagic[8] = {'K', 'N', 'L', 'K', 'E', 'R', 'N', '1'};

inline bool in_cube(double t, int n) { return t >= -0.5 && t <= n - 0.5; }

inline int stencil_base(double t, int n) {
  int b = static_cast<int>(std::floor(t + 0.5)) - 1;
  return std::clamp(b, 0, n - 3);
}

}  // namespace

Mat LinearizedKernel::assemble_raw(const VelocityGrid& g) {
  const int N = g.size(), n = g.n;
  const Vec r = reference_maxwellian(g);
  const Vec sq = r.cwiseSqrt();
  const Vec nu = collision_frequency(g, r);
  const int ns = static_cast<int>(g.sphere_nodes.size());
  const int maxd2 = 3 * (n - 1) * (n - 1);
  std::vector<double> disp(static_cast<size_t>(maxd2 + 1) * ns * 3);
  for (int d2 = 0; d2 <= maxd2; ++d2) {
    double half = 0.5 * std::sqrt(static_cast<double>(d2));
    for (int s = 0; s < ns; ++s)
      for (int a = 0; a < 3; ++a) disp[(static_cast<size_t>(d2) * ns + s) * 3 + a] = half * g.sphere_nodes[s][a];
  }

  Mat K = Mat::Zero(N, N);
  std::vector<double> row(N);
  for (int k = 0; k < N; ++k) {
    std::fill(row.begin(), row.end(), 0.0);
    const int ik = k / (n * n), jk = (k / n) % n, lk = k % n;
    for (int j = 0; j < N; ++j) {
      const int ij = j / (n * n), jj = (j / n) % n, lj = j % n;
      const int dx = ik - ij, dy = jk - jj, dz = lk - lj;
      const int d2 = dx * dx + dy * dy + dz * dz;
      if (d2 == 0) continue;
      const double q = g.h * std::sqrt(static_cast<double>(d2));
      // loss of B(sqrt M g, M)
      row[j] += sq[k] * g.w * 2.0 * std::numbers::pi * q * sq[j];
      // gain of both orderings; u'(s) = v'(-s) so the full sphere of v' counts twice
      const double coef = g.w * sq[k] * q * r[j];
      const double cx = 0.5 * (ik + ij), cy = 0.5 * (jk + jj), cz = 0.5 * (lk + lj);
      const double* dp = &disp[static_cast<size_t>(d2) * ns * 3];
      for (int s = 0; s < ns; ++s) {
        const double ox = dp[3 * s], oy = dp[3 * s + 1], oz = dp[3 * s + 2];
        const double px = cx + ox, py = cy + oy, pz = cz + oz;
        if (!in_cube(px, n) || !in_cube(py, n) || !in_cube(pz, n)) continue;
        if (!in_cube(cx - ox, n) || !in_cube(cy - oy, n) || !in_cube(cz - oz, n)) continue;
        const int bx = stencil_base(px, n), by = stencil_base(py, n), bz = stencil_base(pz, n);
        const auto wx = quad_weights(px - bx), wy = quad_weights(py - by), wz = quad_weights(pz - bz);
        const double c = coef * g.sphere_weights[s];
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) {
            const double cab = c * wx[a] * wy[b];
            const int base = g.index(bx + a, by + b, bz);
            for (int e = 0; e < 3; ++e) row[base + e] -= cab * wz[e] / sq[base + e];
          }
      }
    }
    row[k] += nu[k];
    for (int l = 0; l < N; ++l) K(k, l) = row[l];
  }
  return K;
}

LinearizedKernel LinearizedKernel::assemble(const VelocityGrid& g) {
  LinearizedKernel out;
  out.n_ = g.n;
  out.vmax_ = g.vmax;
  out.n_sphere_ = g.n_sphere;
  Mat K = assemble_raw(g);
  Mat S = 0.5 * (K + K.transpose());
  K.resize(0, 0);
  NullSpace ns(g, FluidState{});
  const Mat& Q = ns.orthonormal();
  Mat SQ = S * Q;
  // (I - QQ^T) S (I - QQ^T)
  Mat QtSQ = Q.transpose() * SQ;
  S.noalias() -= SQ * Q.transpose();
  S.noalias() -= Q * SQ.transpose();
  S.noalias() += Q * (QtSQ * Q.transpose());
  out.L_ = 0.5 * (S + S.transpose());
  out.nu_ = collision_frequency(g, reference_maxwellian(g));
  return out;
}

const Mat& LinearizedKernel::pinv() const {
  if (!pinv_) {
    Eigen::SelfAdjointEigenSolver<Mat> es(L_);
    if (es.info() != Eigen::Success) throw std::runtime_error("LinearizedKernel: eigensolver failed");
    const Vec& lam = es.eigenvalues();
    const double cut = 1e-9 * lam.cwiseAbs().maxCoeff();
    Vec inv(lam.size());
    for (int i = 0; i < lam.size(); ++i) inv[i] = lam[i] > cut ? 1.0 / lam[i] : 0.0;
    auto P = std::make_shared<Mat>(es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose());
    pinv_ = std::move(P);
  }
  return *pinv_;
}

void LinearizedKernel::check_grid(const VelocityGrid& g) const {
  if (g.n != n_ || g.vmax != vmax_ || g.n_sphere != n_sphere_)
    throw std::invalid_argument("LinearizedKernel: kernel was built for a different velocity grid");
}

void LinearizedKernel::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write kernel cache " + path);
  os.write(kMagic, sizeof kMagic);
  std::int32_t hdr[2] = {n_, n_sphere_};
  os.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  os.write(reinterpret_cast<const char*>(&vmax_), sizeof vmax_);
  std::int64_t N = L_.rows();
  os.write(reinterpret_cast<const char*>(&N), sizeof N);
  os.write(reinterpret_cast<const char*>(L_.data()), static_cast<std::streamsize>(sizeof(double) * N * N));
  os.write(reinterpret_cast<const char*>(nu_.data()), static_cast<std::streamsize>(sizeof(double) * N));
  std::int32_t has_pinv = pinv_ ? 1 : 0;
  os.write(reinterpret_cast<const char*>(&has_pinv), sizeof has_pinv);
  if (pinv_)
    os.write(reinterpret_cast<const char*>(pinv_->data()), static_cast<std::streamsize>(sizeof(double) * N * N));
  if (!os) throw std::runtime_error("short write on kernel cache " + path);
}

std::optional<LinearizedKernel> LinearizedKernel::load(const std::string& path, const VelocityGrid& g) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(magic, magic + 8, kMagic)) return std::nullopt;
  std::int32_t hdr[2];
  double vmax;
  std::int64_t N;
  is.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  is.read(reinterpret_cast<char*>(&vmax), sizeof vmax);
  is.read(reinterpret_cast<char*>(&N), sizeof N);
  if (!is || hdr[0] != g.n || hdr[1] != g.n_sphere || vmax != g.vmax || N != g.size()) return std::nullopt;
  LinearizedKernel out;
  out.n_ = g.n;
  out.vmax_ = g.vmax;
  out.n_sphere_ = g.n_sphere;
  out.L_.resize(N, N);
  out.nu_.resize(N);
  is.read(reinterpret_cast<char*>(out.L_.data()), static_cast<std::streamsize>(sizeof(double) * N * N));
  is.read(reinterpret_cast<char*>(out.nu_.data()), static_cast<std::streamsize>(sizeof(double) * N));
  std::int32_t has_pinv = 0;
  is.read(reinterpret_cast<char*>(&has_pinv), sizeof has_pinv);
  if (!is) return std::nullopt;
  if (has_pinv) {
    auto P = std::make_shared<Mat>(N, N);
    is.read(reinterpret_cast<char*>(P->data()), static_cast<std::streamsize>(sizeof(double) * N * N));
    if (!is) return std::nullopt;
    out.pinv_ = std::move(P);
  }
  return out;
}

LinearizedKernel LinearizedKernel::load_or_assemble(const VelocityGrid& g, const std::string& cache_path) {
  if (!cache_path.empty())
    if (auto k = load(cache_path, g)) return std::move(*k);
  LinearizedKernel k = assemble(g);
  if (!cache_path.empty()) k.save(cache_path);
  return k;
}

// ---------------------------------------------------------------------------

StateMap::StateMap(const VelocityGrid& g, const FluidState& s) : n_(g.n), s_(s), amp_(s.rho * s.T * s.T) {
  s.validate();
  const int n = g.n;
  const double sT = std::sqrt(s.T);
  for (int a = 0; a < 3; ++a) {
    A_[a] = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      const double x = s.u[a] + sT * g.axis[i];
      const double t = (x - g.axis[0]) / g.h;
      // keep the stencil attached to node i while the mapped point stays
      // within one spacing, so the map is smooth in the state
      int c = std::abs(x - g.axis[i]) <= g.h ? i : static_cast<int>(std::lround(t));
      c = std::clamp(c, 1, n - 2);
      const auto w = quad_weights(t - (c - 1));
      for (int p = 0; p < 3; ++p) A_[a](i, c - 1 + p) = w[p];
    }
    Eigen::PartialPivLU<Mat> lu(A_[a]);
    Ainv_[a] = lu.inverse();
    if (!Ainv_[a].allFinite()) throw std::runtime_error("StateMap: singular interpolation matrix");
  }
  const int N = g.size();
  in_scale_ = sqrt_maxwellian(g, s).cwiseInverse();
  out_scale_.resize(N);
  for (int k = 0; k < N; ++k) {
    Vec3 x = s.u + sT * Vec3(g.vx[k], g.vy[k], g.vz[k]);
    out_scale_[k] = std::sqrt(maxwellian_at(x, s));
  }
}

void StateMap::tensor(const Mat* A, const double* in, double* out, bool transpose) const {
  const int n = n_, N = n * n * n;
  std::vector<double> a(in, in + N), b(N);
  auto pass = [&](int axis, const std::vector<double>& src, std::vector<double>& dst) {
    const Mat& M = A[axis];
    const int stride = axis == 0 ? n * n : (axis == 1 ? n : 1);
    for (int k = 0; k < N; ++k) {
      const int i = (k / stride) % n;
      const int rest = k - i * stride;
      double acc = 0.0;
      if (!transpose)
        for (int p = 0; p < n; ++p) acc += M(i, p) * src[rest + p * stride];
      else
        for (int p = 0; p < n; ++p) acc += M(p, i) * src[rest + p * stride];
      dst[k] = acc;
    }
  };
  pass(0, a, b);
  pass(1, b, a);
  pass(2, a, b);
  std::copy(b.begin(), b.end(), out);
}

void StateMap::forward(const double* psi, double* out) const {
  const int N = static_cast<int>(in_scale_.size());
  std::vector<double> t(N);
  for (int k = 0; k < N; ++k) t[k] = psi[k] * in_scale_[k];
  tensor(A_, t.data(), out, false);
  for (int k = 0; k < N; ++k) out[k] *= out_scale_[k];
}

void StateMap::adjoint(const double* y, double* out) const {
  const int N = static_cast<int>(in_scale_.size());
  std::vector<double> t(N);
  for (int k = 0; k < N; ++k) t[k] = y[k] * out_scale_[k];
  tensor(A_, t.data(), out, true);
  for (int k = 0; k < N; ++k) out[k] *= in_scale_[k];
}

void StateMap::inverse(const double* y, double* out) const {
  const int N = static_cast<int>(in_scale_.size());
  std::vector<double> t(N);
  for (int k = 0; k < N; ++k) t[k] = y[k] / out_scale_[k];
  tensor(Ainv_, t.data(), out, false);
  for (int k = 0; k < N; ++k) out[k] /= in_scale_[k];
}

void StateMap::inverse_adjoint(const double* z, double* out) const {
  const int N = static_cast<int>(in_scale_.size());
  std::vector<double> t(N);
  for (int k = 0; k < N; ++k) t[k] = z[k] / in_scale_[k];
  tensor(Ainv_, t.data(), out, true);
  for (int k = 0; k < N; ++k) out[k] /= out_scale_[k];
}

namespace {

template <class MapOf>
Mat apply_L_impl(const LinearizedKernel& K, const VelocityGrid& g, MapOf map_of, int m, const Mat& G) {
  K.check_grid(g);
  const int N = g.size();
  if (G.rows() != N || G.cols() != m) throw std::invalid_argument("apply_L: shape mismatch");
  Mat Z(N, m);
  for (int c = 0; c < m; ++c) map_of(c).forward(G.col(c).data(), Z.col(c).data());
  Mat Y = K.matrix() * Z;
  Mat out(N, m);
  for (int c = 0; c < m; ++c) {
    map_of(c).adjoint(Y.col(c).data(), out.col(c).data());
    out.col(c) *= map_of(c).amplitude();
  }
  return out;
}

}  // namespace

Mat apply_L(const LinearizedKernel& K, const VelocityGrid& g, const std::vector<StateMap>& maps, const Mat& G) {
  return apply_L_impl(K, g, [&](int c) -> const StateMap& { return maps[c]; }, static_cast<int>(maps.size()), G);
}

Mat apply_L(const LinearizedKernel& K, const VelocityGrid& g, const StateMap& map, const Mat& G) {
  return apply_L_impl(K, g, [&](int) -> const StateMap& { return map; }, static_cast<int>(G.cols()), G);
}

Vec linearized_L(const Vec& gvec, const FluidState& s, const LinearizedKernel& K, const VelocityGrid& g) {
  std::vector<StateMap> maps{StateMap(g, s)};
  return apply_L(K, g, maps, gvec);
}

Mat dense_L(const LinearizedKernel& K, const VelocityGrid& g, const FluidState& s) {
  const int N = g.size();
  return apply_L(K, g, StateMap(g, s), Mat::Identity(N, N));
}

Mat pseudo_inverse_L(const LinearizedKernel& K, const VelocityGrid& g, const std::vector<StateMap>& maps,
                     const Mat& H, const PinvOptions& opt) {
  K.check_grid(g);
  const int N = g.size();
  const int m = static_cast<int>(H.cols());
  if (H.rows() != N || static_cast<int>(maps.size()) != m)
    throw std::invalid_argument("pseudo_inverse_L: shape mismatch");
  std::vector<NullSpace> nulls;
  nulls.reserve(m);
  for (int c = 0; c < m; ++c) nulls.emplace_back(g, maps[c].state());

  // I^{-1} L_ref^+ I^{-T} / amp inverts L_s exactly on the complement of N_s
  // in exact arithmetic; the conjugate-gradient loop only mops up rounding.
  const Mat& Pref = K.pinv();
  auto precondition = [&](const Mat& R, const std::vector<int>& cols) {
    const int mc = static_cast<int>(cols.size());
    Mat W(N, mc);
    for (int i = 0; i < mc; ++i) maps[cols[i]].inverse_adjoint(R.col(i).data(), W.col(i).data());
    Mat Y = Pref * W;
    Mat Z(N, mc);
    for (int i = 0; i < mc; ++i) {
      Vec z(N);
      maps[cols[i]].inverse(Y.col(i).data(), z.data());
      Z.col(i) = nulls[cols[i]].complement(z) / maps[cols[i]].amplitude();
    }
    return Z;
  };

  Mat X = Mat::Zero(N, m);
  Mat R(N, m);
  Vec hnorm(m);
  for (int c = 0; c < m; ++c) {
    Vec h = H.col(c);
    hnorm[c] = h.norm();
    Vec ph = nulls[c].project(h);
    if (ph.norm() > opt.solvability_tol * std::max(hnorm[c], 1e-300) && ph.norm() > 1e-300)
      throw std::domain_error("pseudo_inverse_L: right-hand side has a null-space component");
    R.col(c) = h - ph;
  }
  std::vector<int> active;
  for (int c = 0; c < m; ++c)
    if (hnorm[c] > 0.0) active.push_back(c);
  if (active.empty()) return X;

  auto gather = [&](const Mat& A, const std::vector<int>& cols) {
    Mat out(N, cols.size());
    for (size_t i = 0; i < cols.size(); ++i) out.col(i) = A.col(cols[i]);
    return out;
  };

  Mat Zall = Mat::Zero(N, m);
  {
    Mat Z = precondition(gather(R, active), active);
    for (size_t i = 0; i < active.size(); ++i) Zall.col(active[i]) = Z.col(i);
  }
  Mat P = Zall;
  Vec rz(m);
  for (int c = 0; c < m; ++c) rz[c] = R.col(c).dot(Zall.col(c));

  for (int it = 0; it < opt.max_iter && !active.empty(); ++it) {
    Mat Pa = gather(P, active);
    Mat APa = apply_L_impl(
        K, g, [&](int i) -> const StateMap& { return maps[active[i]]; }, static_cast<int>(active.size()), Pa);
    std::vector<int> still;
    for (size_t i = 0; i < active.size(); ++i) {
      const int c = active[i];
      Vec ap = nulls[c].complement(APa.col(i));
      const double pap = Pa.col(i).dot(ap);
      if (!(pap > 0.0)) throw std::runtime_error("pseudo_inverse_L: operator not positive on the complement");
      const double alpha = rz[c] / pap;
      X.col(c) += alpha * Pa.col(i);
      Vec r = nulls[c].complement(R.col(c) - alpha * ap);
      R.col(c) = r;
      if (r.norm() > opt.rtol * hnorm[c]) still.push_back(c);
    }
    active = still;
    if (active.empty()) break;
    Mat Z = precondition(gather(R, active), active);
    for (size_t i = 0; i < active.size(); ++i) {
      const int c = active[i];
      const double rz_new = R.col(c).dot(Z.col(i));
      const double beta = rz_new / rz[c];
      rz[c] = rz_new;
      P.col(c) = Z.col(i) + beta * P.col(c);
    }
  }
  if (!active.empty()) throw std::runtime_error("pseudo_inverse_L: no convergence within the iteration limit");
  for (int c = 0; c < m; ++c) X.col(c) = nulls[c].complement(X.col(c));
  return X;
}

Vec pseudo_inverse_L(const Vec& h, const FluidState& s, const LinearizedKernel& K, const VelocityGrid& g,
                     const PinvOptions& opt) {
  std::vector<StateMap> maps{StateMap(g, s)};
  Mat X = pseudo_inverse_L(K, g, maps, h, opt);
  return X.col(0);
}

double estimate_c0(const FluidState& s, const LinearizedKernel& K, const VelocityGrid& g) {
  const int N = g.size();
  Mat L = dense_L(K, g, s);
  L = 0.5 * (L + L.transpose());
  Vec nu = collision_frequency(g, s);
  NullSpace ns(g, s);
  Eigen::HouseholderQR<Mat> qr(ns.orthonormal());
  Mat Qfull = qr.householderQ() * Mat::Identity(N, N);
  Mat Z = Qfull.rightCols(N - 5);
  Mat A = Z.transpose() * L * Z;
  Mat B = Z.transpose() * nu.asDiagonal() * Z;
  A = 0.5 * (A + A.transpose());
  B = 0.5 * (B + B.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(A, B, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("estimate_c0: eigensolver failed");
  return es.eigenvalues()[0];
}

// ---------------------------------------------------------------------------

CollisionModel::CollisionModel(const VelocityGrid& g, std::shared_ptr<const LinearizedKernel> K)
    : g_(g), K_(std::move(K)) {
  K_->check_grid(g_);
}

Mat CollisionModel::apply(const Mat& F, std::vector<FluidState>* states) const {
  const int N = g_.size();
  const int m = static_cast<int>(F.cols());
  std::vector<StateMap> maps;
  maps.reserve(m);
  Mat Psi(N, m);
  Mat Sq(N, m);
  if (states) states->resize(m);
  for (int c = 0; c < m; ++c) {
    FluidState s = match_moments(g_, conserved_moments(g_, F.col(c)));
    if (states) (*states)[c] = s;
    Vec M = maxwellian(g_, s);
    Sq.col(c) = M.cwiseSqrt();
    Psi.col(c) = (F.col(c) - M).cwiseQuotient(Sq.col(c));
    maps.emplace_back(g_, s);
  }
  Mat Y = apply_L(*K_, g_, maps, Psi);
  return -Sq.cwiseProduct(Y);
}

Vec CollisionModel::apply(const Vec& F) const {
  Mat Q = apply(Mat(F));
  return Q.col(0);
}

Mat CollisionModel::linear(const Mat& M, const Mat& A) const {
  const int N = g_.size();
  const int m = static_cast<int>(M.cols());
  std::vector<StateMap> maps;
  maps.reserve(m);
  Mat Psi(N, m), Sq(N, m);
  for (int c = 0; c < m; ++c) {
    FluidState s = match_moments(g_, conserved_moments(g_, M.col(c)));
    Sq.col(c) = sqrt_maxwellian(g_, s);
    Psi.col(c) = A.col(c).cwiseQuotient(Sq.col(c));
    maps.emplace_back(g_, s);
  }
  return -Sq.cwiseProduct(apply_L(*K_, g_, maps, Psi));
}

namespace {
// column scales so the perturbation is delta relative to the Maxwellian
Vec column_scale(const Mat& M, const Mat& A) {
  Vec s(A.cols());
  for (int c = 0; c < A.cols(); ++c) {
    double mm = M.col(c).cwiseAbs().maxCoeff();
    s[c] = A.col(c).cwiseAbs().maxCoeff() / mm;
  }
  return s;
}
Mat scaled(const Mat& A, const Vec& s) {
  Mat out = A;
  for (int c = 0; c < A.cols(); ++c) out.col(c) = s[c] > 0.0 ? Vec(A.col(c) / s[c]) : Vec::Zero(A.rows());
  return out;
}
}  // namespace

Mat CollisionModel::quadratic(const Mat& M, const Mat& A, double delta) const {
  Vec s = column_scale(M, A);
  Mat Ah = scaled(A, s);
  Mat Qp = apply(Mat(M + delta * Ah));
  Mat Qm = apply(Mat(M - delta * Ah));
  Mat Q0 = apply(M);
  Mat out = (Qp + Qm - 2.0 * Q0) / (2.0 * delta * delta);
  for (int c = 0; c < out.cols(); ++c) out.col(c) *= s[c] * s[c];
  return out;
}

Mat CollisionModel::mixed(const Mat& M, const Mat& A, const Mat& B, double delta) const {
  Vec sa = column_scale(M, A), sb = column_scale(M, B);
  Mat Ah = scaled(A, sa), Bh = scaled(B, sb);
  Mat out = apply(Mat(M + delta * (Ah + Bh))) - apply(Mat(M + delta * (Ah - Bh))) - apply(Mat(M - delta * (Ah - Bh))) +
            apply(Mat(M - delta * (Ah + Bh)));
  out /= 4.0 * delta * delta;
  for (int c = 0; c < out.cols(); ++c) out.col(c) *= sa[c] * sb[c];
  return out;
}

}  // namespace kn
