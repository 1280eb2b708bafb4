#include "knudsen/checks.hpp"

#include "knudsen/boltzmann_slab.hpp"
#include "knudsen/collision.hpp"
#include "knudsen/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace kn {

void CheckReport::at_most(const std::string& name, double value, double tol) {
  items.push_back({name, value, tol, value <= tol});
}

void CheckReport::above(const std::string& name, double value, double bound) {
  items.push_back({name, value, bound, value > bound});
}

bool CheckReport::passed() const {
  for (const auto& i : items)
    if (!i.pass) return false;
  return !items.empty();
}

std::string CheckReport::format() const {
  std::ostringstream os;
  os.precision(3);
  for (const auto& i : items)
    os << (i.pass ? "PASS " : "FAIL ") << suite << '.' << i.name << "  value=" << std::scientific << i.value
       << " bound=" << i.tol << '\n';
  return os.str();
}

const std::vector<std::string>& check_suites() {
  static const std::vector<std::string> s{"collision", "layer", "boundary", "euler"};
  return s;
}

namespace {

using Rng = std::mt19937_64;

Vec uniform(Rng& r, int n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vec v(n);
  for (auto& x : v) x = d(r);
  return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// ---------------------------------------------------------------------------

CheckReport collision_suite(const CheckOptions& opt) {
  CheckReport rep;
  rep.suite = "collision";
  Rng rng(opt.seed);
  const VelocityGrid g = build_grid(8, 5.0, 32);
  const int N = g.size();

  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    FluidState s;
    s.rho = 0.5 + uniform(rng, 1, 0, 1)[0];
    s.u = uniform(rng, 3, -0.3, 0.3);
    s.T = 0.7 + 0.6 * uniform(rng, 1, 0, 1)[0];
    const Vec F = maxwellian(g, s).cwiseProduct(uniform(rng, N, 0.5, 1.5));
    const Vec Q = bilinear_collision(g, F, F);
    const auto m = conserved_moments(g, Q);
    worst = std::max(worst, m.cwiseAbs().maxCoeff() / F.cwiseAbs().maxCoeff());
  }
  rep.at_most("moments_random_50", worst, 1e-12);

  if (opt.full) {
    const VelocityGrid g24 = build_grid(24, 6.0, 32);
    const Vec M = maxwellian(g24, FluidState{});
    rep.at_most("annihilation_24", bilinear_collision(g24, M, M).cwiseAbs().maxCoeff() / M.maxCoeff(), 1e-5);
  }

  const LinearizedKernel K = LinearizedKernel::assemble(g);
  FluidState s;
  s.rho = 1.3;
  s.u = Vec3(0.2, -0.1, 0.05);
  s.T = 1.1;
  const Mat L = dense_L(K, g, s);
  rep.at_most("symmetry", (L - L.transpose()).cwiseAbs().maxCoeff() / L.cwiseAbs().maxCoeff(), 1e-10);

  const Mat L0 = dense_L(K, g, FluidState{});
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (L0 + L0.transpose()));
  const Vec ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  int small = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (std::abs(ev[i]) < 1e-8 * top) ++small;
  rep.at_most("null_dimension_offset", std::abs(small - 5), 0.0);
  rep.above("spectral_gap", ev[5] / std::max(std::abs(ev[4]), 1e-300), 1e6);
  rep.above("min_eigenvalue_nonneg", ev[0] / top, -1e-10);

  const double c0 = estimate_c0(FluidState{}, K, g);
  FluidState s2;
  s2.rho = 2.5;
  rep.above("c0_positive", c0, 0.0);
  rep.at_most("c0_density_invariance", rel(estimate_c0(s2, K, g), c0), 1e-8);

  const NullSpace ns(g, s);
  Mat H(N, 4);
  for (int c = 0; c < 4; ++c) H.col(c) = ns.complement(uniform(rng, N, -1, 1).cwiseProduct(sqrt_maxwellian(g, s)));
  const std::vector<StateMap> maps(4, StateMap(g, s));
  const Mat G = pseudo_inverse_L(K, g, maps, H);
  rep.at_most("inverse_residual", (apply_L(K, g, maps, G) - H).norm() / H.norm(), 1e-8);

  // relaxation of a spatially uniform perturbation in the periodic slab
  {
    auto Kp = std::make_shared<const LinearizedKernel>(K);
    CollisionModel Q(g, Kp);
    std::vector<double> x(16);
    for (int j = 0; j < 16; ++j) x[j] = j / 16.0;
    const double eps = 0.1;
    SlabOptions so;
    so.periodic = true;
    BoltzmannSlab S(Q, x, eps, so);
    const FluidState s0;
    const Vec M = maxwellian(g, s0);
    const Vec p = NullSpace(g, s0).complement(uniform(rng, N, -1, 1).cwiseProduct(M.cwiseSqrt()));
    KineticState st;
    st.x = x;
    st.F = (M + 1e-4 * p.cwiseProduct(M.cwiseSqrt()) / p.cwiseAbs().maxCoeff()).replicate(1, 16);
    const double d0 = (st.F - M.replicate(1, 16)).norm();
    const double m0 = st.mass(g, true);
    S.advance_to(st, 0.02);
    const double rate = -std::log((st.F - M.replicate(1, 16)).norm() / d0) / st.t;
    const double predicted = c0 * collision_frequency(g, s0).minCoeff() / eps;
    rep.above("relaxation_rate_over_bound", rate / predicted, 0.5);
    rep.at_most("relaxation_mass_drift", rel(st.mass(g, true), m0), 1e-12);
  }
  return rep;
}

// ---------------------------------------------------------------------------

CheckReport boundary_suite(const CheckOptions& opt) {
  CheckReport rep;
  rep.suite = "boundary";
  Rng rng(opt.seed);
  const VelocityGrid g = build_grid(16, 6.0, 8);
  const int N = g.size();

  rep.at_most("rho_w_closed_form", rel(wall_density(Vec3::Zero(), 1.0), std::sqrt(2.0 * std::numbers::pi)), 1e-14);
  FluidState s0;
  s0.rho = 1.2;
  s0.u = Vec3(0.1, -0.05, 0.0);
  s0.T = 1.15;
  const WallMaxwellian w = wall_maxwellian(s0.u, s0.T, g);
  rep.at_most("unit_incoming_flux", std::abs(incoming_flux(g, w.values) - 1.0), 1e-14);

  const Vec M0 = maxwellian(g, s0);
  const Vec sq = M0.cwiseSqrt();
  const Vec ratio = w.values.cwiseQuotient(M0);
  rep.at_most("wall_ratio_constant", ratio.maxCoeff() / ratio.minCoeff() - 1.0, 1e-12);

  double idem = 0.0;
  for (int i = 0; i < 10; ++i) {
    const Vec f = uniform(rng, N, -1, 1).cwiseProduct(sq);
    const Vec D = diffusive_Dw(f, w, sq, g);
    idem = std::max(idem, (diffusive_Dw(D, w, sq, g) - D).cwiseAbs().maxCoeff() / D.cwiseAbs().maxCoeff());
  }
  rep.at_most("Dw_idempotent", idem, 1e-10);
  const Vec Dsq = diffusive_Dw(sq, w, sq, g);
  double fix = 0.0;
  for (int k = 0; k < N; ++k)
    if (g.vz[k] > 0.0) fix = std::max(fix, std::abs(Dsq[k] - sq[k]));
  rep.at_most("Dw_fixes_sqrtM0", fix / sq.maxCoeff(), 1e-12);

  const LeadingLayerCheck a = verify_leading_layer_vanishes(s0, w, g);
  rep.at_most("leading_layer_residual", a.sup_residual / a.sup_sqrtM0, 1e-8);
  rep.at_most("leading_layer_solvability", std::abs(a.solvability), 1e-12);
  FluidState s1 = s0;
  s1.u[2] = 0.1;
  const LeadingLayerCheck b = verify_leading_layer_vanishes(s1, w, g);
  rep.above("moving_normal_residual", b.sup_residual / b.sup_sqrtM0, 1e-7);
  rep.above("moving_normal_solvability", std::abs(b.solvability), 1e-7);

  double worst = 0.0, cross = 0.0;
  for (int i = 0; i < 20; ++i) {
    Vec f = uniform(rng, N, -1, 1).cwiseProduct(sq);
    const Vec D = diffusive_Dw(f, w, sq, g);
    for (int k = 0; k < N; ++k)
      if (g.vz[k] > 0.0) f[k] = D[k];
    double scale = 0.0;
    for (int k = 0; k < N; ++k)
      if (g.vz[k] < 0.0) scale -= g.vz[k] * f[k] * f[k] * g.w;
    const DissipationCheck c = boundary_dissipation_check(f, w, sq, g);
    worst = std::max(worst, c.residual / scale);
    cross = std::max(cross, std::abs(c.B2) / scale);
  }
  rep.at_most("dissipation_identity", worst, 1e-10);
  rep.at_most("cross_term_B2", cross, 1e-10);
  return rep;
}

// ---------------------------------------------------------------------------

CheckReport layer_suite(const CheckOptions& opt) {
  CheckReport rep;
  rep.suite = "layer";
  Rng rng(opt.seed);
  const LayerGrid lg = make_layer_grid(20.0, 64, 1.05, 0.95);
  const std::vector<double> xi = lg.points();
  const int P = static_cast<int>(xi.size());

  {
    const VelocityGrid g = build_grid(8, 5.0, 8);
    const FluidLayerCoefficients co = fluid_layer_coefficients(
        xi, [](double z) { return std::exp(-z); }, [](double) { return std::array<double, 3>{0, 0, 0}; },
        [](double) { return 0.0; }, 1.0);
    double err = 0.0;
    for (int p = 0; p < P; ++p) {
      const double e = std::exp(-xi[p]);
      err = std::max({err, std::abs(co.Psi[p] + 2.0 * e), std::abs(co.Theta[p] - e / 5.0), std::abs(co.Phi1[p]),
                      std::abs(co.Phi2[p]), std::abs(co.Phi3[p])});
    }
    rep.at_most("analytic_coefficients", err, 1e-10);
    rep.at_most("functional_J_example",
                std::abs(boundary_functional_J(g, FluidState{}, Vec::Zero(g.size()), -2.0, 0.2) + 1.0), 1e-12);
  }

  {
    // the defect is a quadrature identity; it needs a wide velocity box
    const VelocityGrid g = build_grid(20, 8.0, 8);
    FluidState s0;
    s0.rho = 1.01;
    s0.u = Vec3(0.02, 0, 0);
    s0.T = 1.02;
    const NullSpace ns(g, s0);
    const Vec R1 = uniform(rng, g.size(), -1, 1), R2 = uniform(rng, g.size(), -1, 1);
    Mat S(g.size(), P);
    for (int p = 0; p < P; ++p) S.col(p) = std::exp(-xi[p]) * R1 + std::exp(-2.0 * xi[p]) * R2;
    ns.project_columns(S);
    std::vector<double> a, c;
    std::vector<std::array<double, 3>> b;
    null_coefficients(S, s0, g, a, b, c);
    const double T0 = s0.T;
    FluidLayerCoefficients d;
    for (int p = 0; p < P; ++p) {
      d.Psi.push_back(2.0 * a[p] / T0 + 3.0 * c[p]);
      d.Phi1.push_back(b[p][0] / T0);
      d.Phi2.push_back(b[p][1] / T0);
      d.Phi3.push_back(b[p][2]);
      d.Theta.push_back(-a[p] / (5.0 * T0 * T0));
    }
    const Mat D = g.vz.asDiagonal() * fluid_layer_part(xi, d, s0, g).f - S;
    Mat PD = D;
    ns.project_columns(PD);
    rep.at_most("lemma_defect", PD.cwiseAbs().maxCoeff() / std::max(S.cwiseAbs().maxCoeff(), D.cwiseAbs().maxCoeff()),
                1e-8);
  }

  {
    const VelocityGrid g = build_grid(16, 6.0, 8);
    FluidState s0;
    s0.rho = 1.1;
    s0.T = 0.9;
    const Vec sq = sqrt_maxwellian(g, s0);
    const double delta = 1e-3;
    Vec f = Vec::Zero(g.size());
    // fluid part with u . n = delta, n = -e3
    for (int k = 0; k < g.size(); ++k) f[k] = -delta * g.vz[k] / s0.T * sq[k];
    rep.at_most("solvability_coefficient", std::abs(solvability_residual(f, Vec::Zero(g.size()), sq, g) / delta - s0.rho),
                1e-6);
  }

  {
    const VelocityGrid g = build_grid(8, 5.0, 16);
    const LinearizedKernel K = LinearizedKernel::assemble(g);
    const FluidState s0;
    const WallMaxwellian w = wall_maxwellian(s0.u, s0.T, g);
    const Vec sq = sqrt_maxwellian(g, s0);
    const int N = g.size();
    const Mat zero = Mat::Zero(N, lg.cells());
    const LayerBvpResult z = solve_layer_bvp(zero, Vec::Zero(N), w, s0, K, g, lg);
    rep.at_most("zero_data_zero_solution", z.profile.f.cwiseAbs().maxCoeff(), 0.0);

    Vec f(N);
    for (int k = 0; k < N; ++k) f[k] = g.vx[k] * g.vz[k] * sq[k];
    Vec data = -(f - diffusive_Dw(f, w, sq, g));
    for (int k = 0; k < N; ++k)
      if (g.vz[k] <= 0.0) data[k] = 0.0;
    const LayerBvpResult r = solve_layer_bvp(zero, data, w, s0, K, g, lg);
    rep.at_most("bvp_residual", layer_bvp_residual(r.profile, zero, r.data_used, w, s0, K, g, lg), 1e-8);
    rep.at_most("bvp_flux_constant", r.flux_deviation, 1e-9);
    rep.above("bvp_decay_rate", fit_decay_rate(r.profile), 0.0);
  }
  return rep;
}

// ---------------------------------------------------------------------------

CheckReport euler_suite(const CheckOptions&) {
  CheckReport rep;
  rep.suite = "euler";

  {
    const EulerField u = manufactured_state("uniform", 0.0, 100, 4.0);
    const EulerField v = advance_euler(u, euler_stable_dt(u, 0.4));
    double d = 0.0;
    for (int i = 0; i < u.nx(); ++i)
      d = std::max({d, std::abs(v.rho[i] - u.rho[i]), std::abs(v.u3[i] - u.u3[i]), std::abs(v.T[i] - u.T[i])});
    rep.at_most("uniform_preserved", d, 1e-14);
  }

  const EulerField f = manufactured_state("gauss-density", 0.1, 400, 4.0);
  {
    const EulerField v = advance_euler(f, euler_stable_dt(f, 0.4));
    rep.at_most("mass_per_step", rel(v.mass(), f.mass()), 1e-12);
  }
  {
    bool threw = false;
    try {
      advance_euler(f, 10.0 * euler_stable_dt(f, 0.9));
    } catch (const std::exception&) {
      threw = true;
    }
    rep.at_most("cfl_violation_rejected", threw ? 0.0 : 1.0, 0.0);
  }
  {
    const ManufacturedProfile prof = manufactured_profile("gauss-density", 0.1);
    const EulerField fine = manufactured_state(prof, 1000, 4.0);
    const EulerRates r = euler_time_derivative(fine);
    double err = 0.0;
    for (int i = 0; i < fine.nx(); ++i) {
      const auto v = prof.value(fine.x[i]);
      const auto dv = prof.derivative(fine.x[i]);
      const double exact = -(dv[0] * v[4] + v[0] * dv[4]) / v[0];
      err = std::max({err, std::abs(r.u3[i] - exact), std::abs(r.rho[i])});
    }
    rep.at_most("time_derivative_analytic", err, 1e-6);
  }
  {
    // self-convergence of the density at t = 0.1 on 100/200/400 cells
    std::vector<std::vector<double>> rho;
    for (int n : {100, 200, 400}) {
      const auto s = run_euler(manufactured_state("gauss-density", 0.1, n, 4.0), 0.4, {0.0, 0.1});
      rho.push_back(s.back().rho);
    }
    auto restrict_to = [](const std::vector<double>& v) {
      std::vector<double> o(v.size() / 2);
      for (size_t i = 0; i < o.size(); ++i) o[i] = 0.5 * (v[2 * i] + v[2 * i + 1]);
      return o;
    };
    const auto r1 = restrict_to(rho[1]);
    const auto r2 = restrict_to(rho[2]);
    double e1 = 0.0, e2 = 0.0;
    for (size_t i = 0; i < r1.size(); ++i) e1 += std::abs(rho[0][i] - r1[i]) * 0.04;
    for (size_t i = 0; i < r2.size(); ++i) e2 += std::abs(rho[1][i] - r2[i]) * 0.02;
    rep.above("self_convergence_order", std::log2(e1 / e2), 1.8);
  }
  {
    // (U(t + dt) - U(t)) / dt against the semi-discrete right-hand side
    const EulerField g = manufactured_state("gauss-density", 0.1, 200, 4.0);
    const std::vector<Conserved> U = euler_conserved(g);
    const std::vector<Conserved> R = euler_rhs(U, g.dx());
    auto err = [&](double dt) {
      const std::vector<Conserved> V = euler_conserved(advance_euler(g, dt));
      double e = 0.0;
      for (size_t i = 0; i < U.size(); ++i)
        for (int c = 0; c < 5; ++c) e = std::max(e, std::abs((V[i][c] - U[i][c]) / dt - R[i][c]));
      return e;
    };
    const double dt = euler_stable_dt(g, 0.4);
    const double q = err(dt) / err(0.5 * dt);
    rep.at_most("first_order_consistency", std::abs(q - 2.0), 0.5);
  }
  return rep;
}

}  // namespace

CheckReport run_check_suite(const std::string& suite, const CheckOptions& opt) {
  if (suite == "collision") return collision_suite(opt);
  if (suite == "boundary") return boundary_suite(opt);
  if (suite == "layer") return layer_suite(opt);
  if (suite == "euler") return euler_suite(opt);
  throw std::invalid_argument("unknown check suite '" + suite + "'");
}

}  // namespace kn
