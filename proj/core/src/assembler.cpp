#include "knudsen/assembler.hpp"

#include "knudsen/quadrature.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace kn {

namespace {

Mat replicate(const Vec& v, int cols) { return v.replicate(1, cols); }

Mat to_F(const LayerProfile& p, const Vec& sqM0) { return sqM0.asDiagonal() * p.f; }

Vec sqrt_M0(const LayerSample& s, const VelocityGrid& g) { return sqrt_maxwellian(g, s.s0); }

// data -(I - D_w) f on v3 > 0, zero elsewhere
Vec layer_data(const Vec& f, const WallMaxwellian& wall, const Vec& sqM0, const VelocityGrid& g) {
  Vec d = -(f - diffusive_Dw(f, wall, sqM0, g));
  for (int k = 0; k < g.size(); ++k)
    if (g.vz[k] <= 0.0) d[k] = 0.0;
  return d;
}

double sup_norm(const Mat& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

Vec ExpansionBundle::layer_F(int k, int m, double xi) const {
  const LayerSample& s = layers.at(m);
  const LayerProfile& p = k == 1 ? s.f1 : s.f2;
  return sqrt_M0(s, grid).cwiseProduct(p.at(xi));
}

Mat wall_taylor(const Mat& F, const std::vector<double>& x, int order) {
  return x_derivatives(F, x, 0.0, order, order + 5);
}

LayerSourceTerms layer_sources(const CollisionModel& Q, int k, const ExpansionBundle& b, int m) {
  const VelocityGrid& g = b.grid;
  const std::vector<double> xi = b.layer_grid.points();
  const int P = static_cast<int>(xi.size());
  LayerSourceTerms out;
  out.S1 = Mat::Zero(g.size(), P);
  out.S2 = Mat::Zero(g.size(), P);
  if (k == 1) return out;
  if (k != 2) throw std::invalid_argument("layer_sources: k must be 1 or 2");
  const InteriorExpansion& in = b.interior;
  const LayerSample& ls = b.layers.at(m);
  const Vec sq = sqrt_M0(ls, g);

  Mat dF = Mat::Zero(g.size(), P);
  const FdStencil st = fd_stencil(m, in.samples());
  for (int q = 0; q < st.len; ++q) {
    const LayerSample& o = b.layers.at(st.start + q);
    dF += (st.c[q] / in.dt) * to_F(o.f1, sqrt_M0(o, g));
  }
  const Mat G = sq.cwiseInverse().asDiagonal() * dF;
  const NullSpace ns(g, ls.s0);
  out.S1 = G;
  ns.project_columns(out.S1);
  out.S1 = -out.S1;
  Mat part = -G;
  ns.complement_columns(part);

  const Mat F1b = to_F(ls.f1, sq);
  const Mat M0 = replicate(maxwellian(g, ls.s0), P);
  const Mat M1 = wall_taylor(in.M[m], in.x, 1).col(1);
  Mat A = replicate(in.F1[m].col(0), P);
  for (int p = 0; p < P; ++p) A.col(p) += xi[p] * M1;
  Mat coll = Q.quadratic(M0, F1b) + Q.mixed(M0, A, F1b);
  out.S2 = part + sq.cwiseInverse().asDiagonal() * coll;
  ns.complement_columns(out.S2);
  return out;
}

void build_layers(const CollisionModel& Q, ExpansionBundle& b, const LayerSettings& s) {
  const VelocityGrid& g = b.grid;
  const InteriorExpansion& in = b.interior;
  b.layer_grid = make_layer_grid(s.xi_max, s.cells, s.stretch, s.sigma0);
  const LayerGrid& lg = b.layer_grid;
  const std::vector<double> xi = lg.points();
  const int P = static_cast<int>(xi.size());
  const int nc = lg.cells();
  const LinearizedKernel& K = Q.kernel();
  const int ns = in.samples();
  b.layers.assign(ns, LayerSample{});

  for (int m = 0; m < ns; ++m) {
    LayerSample& L = b.layers[m];
    L.s0 = in.pts[m][0].s;
    L.s0.u[2] = 0.0;  // impermeable wall
    L.wall = wall_maxwellian(L.s0.u, L.s0.T, g);
    const Vec sq = sqrt_maxwellian(g, L.s0);
    const Vec f1 = in.F1[m].col(0).cwiseQuotient(sq);
    L.solvability1 = solvability_residual(f1, Vec::Zero(g.size()), sq, g);
    L.bvp1 = solve_layer_bvp(Mat::Zero(g.size(), nc), layer_data(f1, L.wall, sq, g), L.wall, L.s0, K, g, lg, s.bvp);
    L.f1 = L.bvp1.profile;
  }

  for (int m = 0; m < ns; ++m) {
    LayerSample& L = b.layers[m];
    const Vec sq = sqrt_maxwellian(g, L.s0);
    const double T0 = L.s0.T;
    const LayerSourceTerms src = layer_sources(Q, 2, b, m);
    std::vector<double> a, c;
    std::vector<std::array<double, 3>> bb;
    null_coefficients(src.S1, L.s0, g, a, bb, c);
    const FluidLayerCoefficients co = fluid_layer_coefficients(xi, a, bb, c, T0);
    L.f2_fluid = fluid_layer_part(xi, co, L.s0, g);

    // v3 d_xi of the explicit part, from the coefficient derivatives
    FluidLayerCoefficients d;
    d.Psi.resize(P);
    d.Phi1.resize(P);
    d.Phi2.resize(P);
    d.Phi3.resize(P);
    d.Theta.resize(P);
    for (int p = 0; p < P; ++p) {
      d.Psi[p] = 2.0 * a[p] / T0 + 3.0 * c[p];
      d.Phi1[p] = bb[p][0] / T0;
      d.Phi2[p] = bb[p][1] / T0;
      d.Phi3[p] = bb[p][2];
      d.Theta[p] = -a[p] / (5.0 * T0 * T0);
    }
    const Mat D = g.vz.asDiagonal() * fluid_layer_part(xi, d, L.s0, g).f - src.S1;
    Mat PD = D;
    NullSpace(g, L.s0).project_columns(PD);
    const double scale = std::max(sup_norm(src.S1), sup_norm(D));
    L.lemma_defect = scale > 0.0 ? sup_norm(PD) / scale : 0.0;

    Mat source = (src.S2 - D).rightCols(nc);
    NullSpace(g, L.s0).complement_columns(source);
    const Vec f2 = in.F2[m].col(0).cwiseQuotient(sq);
    const Vec trace = f2 + L.f2_fluid.f.col(0);
    L.solvability2 = solvability_residual(f2, L.f2_fluid.f.col(0), sq, g);
    L.bvp2 = solve_layer_bvp(source, layer_data(trace, L.wall, sq, g), L.wall, L.s0, K, g, lg, s.bvp);
    L.f2.xi = xi;
    L.f2.f = L.f2_fluid.f + L.bvp2.profile.f;
  }
}

ExpansionBundle build_bundle(const CollisionModel& Q, const InteriorExpansion& interior, const LayerSettings& s) {
  ExpansionBundle b;
  b.grid = Q.grid();
  b.interior = interior;
  build_layers(Q, b, s);
  return b;
}

Mat assemble_ansatz(const ExpansionBundle& b, int m, double eps) {
  const InteriorExpansion& in = b.interior;
  Mat F = in.M[m];
  if (eps == 0.0) return F;
  F += eps * in.F1[m] + eps * eps * in.F2[m];
  for (int j = 0; j < in.nodes(); ++j) {
    const double xi = in.x[j] / eps;
    if (xi > b.layer_grid.faces.back()) continue;
    F.col(j) += eps * b.layer_F(1, m, xi) + eps * eps * b.layer_F(2, m, xi);
  }
  return F;
}

Vec ansatz_at(const ExpansionBundle& b, double t, double eps, int node) {
  const InteriorExpansion& in = b.interior;
  const InterpStencil st = lagrange_stencil(in.times, t, 4);
  Vec out = Vec::Zero(b.grid.size());
  for (size_t q = 0; q < st.w.size(); ++q) {
    const int m = st.start + static_cast<int>(q);
    Vec c = in.M[m].col(node);
    if (eps > 0.0) {
      c += eps * in.F1[m].col(node) + eps * eps * in.F2[m].col(node);
      const double xi = in.x[node] / eps;
      if (xi <= b.layer_grid.faces.back()) c += eps * b.layer_F(1, m, xi) + eps * eps * b.layer_F(2, m, xi);
    }
    out += st.w[q] * c;
  }
  return out;
}

FluidState wall_state_at(const ExpansionBundle& b, double t) {
  const InteriorExpansion& in = b.interior;
  const InterpStencil st = lagrange_stencil(in.times, t, 4);
  FluidState s{0.0, Vec3::Zero(), 0.0};
  for (size_t q = 0; q < st.w.size(); ++q) {
    const FluidState& w = in.pts[st.start + q][0].s;
    s.rho += st.w[q] * w.rho;
    s.u += st.w[q] * w.u;
    s.T += st.w[q] * w.T;
  }
  s.u[2] = 0.0;
  return s;
}

RemainderForcings remainder_forcings(const CollisionModel& Q, const ExpansionBundle& b, int m, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("remainder_forcings: eps must be positive");
  const VelocityGrid& g = b.grid;
  const InteriorExpansion& in = b.interior;
  const int N = g.size(), np = in.nodes();
  RemainderForcings out;
  out.R = -transport_of(g, in.F2, m, in.dt, in.dx) + Q.mixed(in.M[m], in.F1[m], in.F2[m]);

  const LayerSample& ls = b.layers.at(m);
  const Mat M0 = replicate(maxwellian(g, ls.s0), np);
  std::vector<double> xi(np);
  Mat B1 = Mat::Zero(N, np), B2 = Mat::Zero(N, np), dB2 = Mat::Zero(N, np);
  const FdStencil st = fd_stencil(m, in.samples());
  for (int j = 0; j < np; ++j) {
    xi[j] = in.x[j] / eps;
    if (xi[j] > b.layer_grid.faces.back()) continue;
    B1.col(j) = b.layer_F(1, m, xi[j]);
    B2.col(j) = b.layer_F(2, m, xi[j]);
    for (int q = 0; q < st.len; ++q) dB2.col(j) += (st.c[q] / in.dt) * b.layer_F(2, st.start + q, xi[j]);
  }

  const Mat TM = wall_taylor(in.M[m], in.x, 2);
  const Mat T1 = wall_taylor(in.F1[m], in.x, 2);
  const Mat T2 = wall_taylor(in.F2[m], in.x, 2);
  const Mat* Ti[3] = {nullptr, &T1, &T2};
  // first arguments paired with B1 and B2 (without the third-derivative terms)
  Mat A1(N, np), A2(N, np);
  for (int j = 0; j < np; ++j) {
    const double z = xi[j];
    Vec a1 = T2.col(0) + 0.5 * z * z * TM.col(2);
    Vec a2 = T1.col(0) + eps * T2.col(0) + z * TM.col(1) + eps * 0.5 * z * z * TM.col(2);
    for (int l = 1; l <= 2; ++l)
      for (int i = 1; i <= 2; ++i) {
        const double f = std::pow(z, l) / (l == 1 ? 1.0 : 2.0);
        a1 += std::pow(eps, l + i - 2) * f * Ti[i]->col(l);
        a2 += std::pow(eps, l + i - 1) * f * Ti[i]->col(l);
      }
    A1.col(j) = a1;
    A2.col(j) = a2;
  }
  const Mat base = -dB2 + Q.mixed(M0, A1, B1) + Q.mixed(M0, A2, B2) + Q.mixed(M0, B1, B2) + eps * Q.quadratic(M0, B2);

  const double fracs[3] = {0.25, 0.5, 0.75};
  Mat terms[3];
  for (int r = 0; r < 3; ++r) {
    Mat C1 = Mat::Zero(N, np), C2 = Mat::Zero(N, np);
    for (int j = 0; j < np; ++j) {
      const double z = xi[j];
      if (B1.col(j).isZero(0.0) && B2.col(j).isZero(0.0)) continue;
      const double probe = fracs[r] * in.x[j];
      const Vec m3 = x_derivatives(in.M[m], in.x, probe, 3, 8).col(3);
      const Vec f13 = x_derivatives(in.F1[m], in.x, probe, 3, 8).col(3);
      const Vec f23 = x_derivatives(in.F2[m], in.x, probe, 3, 8).col(3);
      const double c3 = z * z * z / 6.0;
      C1.col(j) = c3 * (eps * m3 + eps * eps * f13 + eps * eps * eps * f23);
      C2.col(j) = c3 * (eps * eps * m3 + eps * eps * eps * f13 + eps * eps * eps * eps * f23);
    }
    terms[r] = Q.mixed(M0, C1, B1) + Q.mixed(M0, C2, B2);
  }
  out.Rbb = base + terms[1];
  out.Rbb_lo = base + terms[0].cwiseMin(terms[1]).cwiseMin(terms[2]);
  out.Rbb_hi = base + terms[0].cwiseMax(terms[1]).cwiseMax(terms[2]);
  return out;
}

// ---------------------------------------------------------------------------
// archive

namespace {

constexpr char kMagic[8] = {'K', 'N', 'B', 'U', 'N', 'D', 'L', '1'};

struct Writer {
  std::ofstream os;
  explicit Writer(const std::string& p) : os(p, std::ios::binary) {
    if (!os) throw std::runtime_error("save_bundle: cannot open " + p);
  }
  void i(std::int64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void d(double v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void vec(const std::vector<double>& v) {
    i(static_cast<std::int64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void mat(const Mat& A) {
    i(A.rows());
    i(A.cols());
    os.write(reinterpret_cast<const char*>(A.data()), static_cast<std::streamsize>(A.size() * sizeof(double)));
  }
  void state(const FluidState& s) {
    d(s.rho);
    for (int k = 0; k < 3; ++k) d(s.u[k]);
    d(s.T);
  }
  void profile(const LayerProfile& p) {
    vec(p.xi);
    mat(p.f);
  }
};

struct Reader {
  std::ifstream is;
  explicit Reader(const std::string& p) : is(p, std::ios::binary) {
    if (!is) throw std::runtime_error("load_bundle: cannot open " + p);
  }
  void check() {
    if (!is) throw std::runtime_error("load_bundle: truncated archive");
  }
  std::int64_t i() {
    std::int64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  double d() {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  std::vector<double> vec() {
    const auto n = i();
    if (n < 0 || n > (std::int64_t(1) << 32)) throw std::runtime_error("load_bundle: bad length");
    std::vector<double> v(static_cast<size_t>(n));
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    check();
    return v;
  }
  Mat mat() {
    const auto r = i(), c = i();
    if (r < 0 || c < 0 || r * c > (std::int64_t(1) << 34)) throw std::runtime_error("load_bundle: bad shape");
    Mat A(r, c);
    is.read(reinterpret_cast<char*>(A.data()), static_cast<std::streamsize>(A.size() * sizeof(double)));
    check();
    return A;
  }
  FluidState state() {
    FluidState s;
    s.rho = d();
    for (int k = 0; k < 3; ++k) s.u[k] = d();
    s.T = d();
    return s;
  }
  LayerProfile profile() {
    LayerProfile p;
    p.xi = vec();
    p.f = mat();
    return p;
  }
};

void write_bvp(Writer& w, const LayerBvpResult& r) {
  w.d(r.residual);
  w.i(r.iterations);
  w.d(r.solvability_before);
  w.d(r.adjustment);
  w.d(r.flux_deviation);
  w.d(r.far_state);
  w.mat(r.data_used);
}

LayerBvpResult read_bvp(Reader& r) {
  LayerBvpResult b;
  b.residual = r.d();
  b.iterations = static_cast<int>(r.i());
  b.solvability_before = r.d();
  b.adjustment = r.d();
  b.flux_deviation = r.d();
  b.far_state = r.d();
  b.data_used = r.mat();
  return b;
}

void write_correction(Writer& w, const CorrectionField& c) {
  w.d(c.t);
  w.vec(c.x);
  w.vec(c.rho1);
  w.vec(c.u1_1);
  w.vec(c.u1_2);
  w.vec(c.u1_3);
  w.vec(c.theta1);
}

CorrectionField read_correction(Reader& r) {
  CorrectionField c;
  c.t = r.d();
  c.x = r.vec();
  c.rho1 = r.vec();
  c.u1_1 = r.vec();
  c.u1_2 = r.vec();
  c.u1_3 = r.vec();
  c.theta1 = r.vec();
  return c;
}

}  // namespace

void save_bundle(const ExpansionBundle& b, const std::string& path) {
  Writer w(path);
  w.os.write(kMagic, sizeof kMagic);
  w.i(b.grid.n);
  w.d(b.grid.vmax);
  w.i(b.grid.n_sphere);
  const InteriorExpansion& in = b.interior;
  w.vec(in.times);
  w.vec(in.x);
  w.d(in.dx);
  w.d(in.dt);
  w.d(in.f1_solvability);
  w.d(in.f2_solvability);
  w.vec(in.J);
  const int ns = in.samples();
  for (int m = 0; m < ns; ++m) {
    w.i(static_cast<std::int64_t>(in.pts[m].size()));
    for (const EulerPoint& p : in.pts[m]) {
      w.d(p.x);
      w.state(p.s);
      for (int k = 0; k < 3; ++k) w.d(p.du[k]);
      w.d(p.drho);
      w.d(p.dT);
      for (int k = 0; k < 3; ++k) w.d(p.du_dt[k]);
      w.d(p.drho_dt);
      w.d(p.dT_dt);
    }
    write_correction(w, in.corr[m]);
    w.mat(in.M[m]);
    w.mat(in.F1[m]);
    w.mat(in.F2[m]);
    w.mat(in.k1[m]);
  }
  w.vec(b.layer_grid.faces);
  w.vec(b.layer_grid.centres);
  w.d(b.layer_grid.sigma0);
  w.i(static_cast<std::int64_t>(b.layers.size()));
  for (const LayerSample& L : b.layers) {
    w.state(L.s0);
    w.profile(L.f1);
    w.profile(L.f2_fluid);
    w.profile(L.f2);
    write_bvp(w, L.bvp1);
    write_bvp(w, L.bvp2);
    w.d(L.solvability1);
    w.d(L.solvability2);
    w.d(L.lemma_defect);
  }
  if (!w.os) throw std::runtime_error("save_bundle: write failed for " + path);
}

ExpansionBundle load_bundle(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.is.read(magic, sizeof magic);
  r.check();
  if (!std::equal(magic, magic + 8, kMagic)) throw std::runtime_error("load_bundle: not a bundle archive");
  ExpansionBundle b;
  const int n = static_cast<int>(r.i());
  const double vmax = r.d();
  const int nsph = static_cast<int>(r.i());
  b.grid = build_grid(n, vmax, nsph);
  InteriorExpansion& in = b.interior;
  in.times = r.vec();
  in.x = r.vec();
  in.dx = r.d();
  in.dt = r.d();
  in.f1_solvability = r.d();
  in.f2_solvability = r.d();
  in.J = r.vec();
  const int ns = static_cast<int>(in.times.size());
  in.pts.resize(ns);
  for (int m = 0; m < ns; ++m) {
    const auto np = r.i();
    in.pts[m].resize(static_cast<size_t>(np));
    for (EulerPoint& p : in.pts[m]) {
      p.x = r.d();
      p.s = r.state();
      for (int k = 0; k < 3; ++k) p.du[k] = r.d();
      p.drho = r.d();
      p.dT = r.d();
      for (int k = 0; k < 3; ++k) p.du_dt[k] = r.d();
      p.drho_dt = r.d();
      p.dT_dt = r.d();
    }
    in.corr.push_back(read_correction(r));
    in.M.push_back(r.mat());
    in.F1.push_back(r.mat());
    in.F2.push_back(r.mat());
    in.k1.push_back(r.mat());
  }
  b.layer_grid.faces = r.vec();
  b.layer_grid.centres = r.vec();
  b.layer_grid.sigma0 = r.d();
  const auto nl = r.i();
  b.layers.resize(static_cast<size_t>(nl));
  for (LayerSample& L : b.layers) {
    L.s0 = r.state();
    L.wall = wall_maxwellian(L.s0.u, L.s0.T, b.grid);
    L.f1 = r.profile();
    L.f2_fluid = r.profile();
    L.f2 = r.profile();
    L.bvp1 = read_bvp(r);
    L.bvp2 = read_bvp(r);
    L.solvability1 = r.d();
    L.solvability2 = r.d();
    L.lemma_defect = r.d();
  }
  return b;
}

}  // namespace kn
