// Worked input/output examples per module, with closed-form oracles where
// one exists.

#include "knudsen/assembler.hpp"
#include "knudsen/boltzmann_slab.hpp"
#include "knudsen/collision.hpp"
#include "knudsen/harness.hpp"

#include "common.hpp"
#include "pipeline.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace kn;

namespace {

constexpr double kPi = std::numbers::pi;

Vec random_unit_complement(const VelocityGrid& g, const NullSpace& P, std::mt19937_64& rng) {
  std::normal_distribution<double> N01;
  Vec v(g.size());
  for (auto& x : v) x = N01(rng);
  v = P.complement(v);
  return v / v.norm();
}

}  // namespace

TEST_SUITE("velocity_grid") {
  TEST_CASE("two nodes per axis") {
    auto g = build_grid(2, 1.0, 8);
    CHECK(g.size() == 8);
    CHECK(g.weights().sum() == doctest::Approx(8.0));
  }

  TEST_CASE("24^3 moments of Maxwellians") {
    auto g = build_grid(24, 6.0, 32);
    CHECK(std::abs(moment(g, maxwellian(g, FluidState{}), Weight::one()) - 1.0) <= 1e-6);
    CHECK(std::abs(moment(g, maxwellian(g, FluidState{}), Weight::v(2))) <= 1e-16);
    CHECK(moment(g, maxwellian(g, FluidState{}), Weight::v2()) == doctest::Approx(3.0).epsilon(1e-6));
    FluidState s{1.3, Vec3(0.3, -0.2, 0.1), 1.1};
    auto m = conserved_moments(g, maxwellian(g, s));
    CHECK(m[0] == doctest::Approx(s.rho).epsilon(1e-6));
    for (int i = 0; i < 3; ++i) CHECK(m[1 + i] == doctest::Approx(s.rho * s.u[i]).epsilon(1e-6));
    CHECK(m[4] == doctest::Approx(s.rho * (3.0 * s.T + s.u.squaredNorm()) / 2.0).epsilon(1e-6));
  }

  TEST_CASE("Maxwellian values") {
    CHECK(maxwellian_at(Vec3::Zero(), FluidState{}) == doctest::Approx(std::pow(2.0 * kPi, -1.5)));
    CHECK(maxwellian_at(Vec3::Zero(), FluidState{}) == doctest::Approx(0.063494).epsilon(1e-5));
    FluidState s{1.4, Vec3(0.5, -0.2, 0.3), 0.8};
    FluidState s0{1.4, Vec3::Zero(), 0.8};
    Vec3 v(0.7, 1.1, -0.4);
    CHECK(maxwellian_at(v, s) == doctest::Approx(maxwellian_at(v - s.u, s0)).epsilon(1e-15));
  }
}

TEST_SUITE("collision") {
  TEST_CASE("collision frequency at zero velocity") {
    // nu(v; rho, u, T) = nu(v - u; rho, 0, T): put the centre of the
    // Maxwellian on a node to evaluate at relative velocity zero
    // the kink of |v - u| sits on the node; the error falls at fourth order
    auto at_zero = [](int n) {
      auto g = build_grid(n, 6.0, 8);
      const int k = g.index(n / 2, n / 2, n / 2);
      return collision_frequency(g, FluidState{1.0, g.node(k), 1.0})[k];
    };
    const double exact = 2.0 * std::sqrt(8.0 * kPi);
    CHECK(exact == doctest::Approx(10.0265).epsilon(1e-5));
    const double e24 = std::abs(at_zero(24) / exact - 1.0), e32 = std::abs(at_zero(32) / exact - 1.0);
    CHECK(e24 <= 1e-3);
    CHECK(e32 <= 0.5 * e24);
  }

  TEST_CASE("collision frequency grows like <v>") {
    auto g = build_grid(12, 6.0, 8);
    FluidState s{1.7, Vec3::Zero(), 1.0};
    Vec nu = collision_frequency(g, s);
    double lo = 1e300, hi = 0.0;
    for (int k = 0; k < g.size(); ++k) {
      const double r = nu[k] / (s.rho * std::sqrt(1.0 + g.node(k).squaredNorm()));
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    CHECK(lo > 1.0);
    CHECK(hi < 10.0);
  }

  TEST_CASE("linearized operator: symmetry and positivity on random data") {
    const auto& g = small_grid();
    FluidState s{1.2, Vec3(0.1, -0.1, 0.0), 1.05};
    Mat L = dense_L(*small_kernel(), g, s);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> N01;
    auto rnd = [&] {
      Vec v(g.size());
      for (auto& x : v) x = N01(rng);
      return v;
    };
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      Vec a = rnd(), b = rnd();
      const double l = a.dot(L * b), r = b.dot(L * a);
      worst = std::max(worst, std::abs(l - r) / (std::abs(l) + std::abs(r)));
    }
    CHECK(worst <= 1e-10);
    double mn = 1e300;
    for (int i = 0; i < 100; ++i) {
      Vec a = rnd();
      mn = std::min(mn, a.dot(L * a) / a.squaredNorm());
    }
    CHECK(mn >= 0.0);
  }

  TEST_CASE("projection fixes the square root Maxwellian") {
    auto g = build_grid(12, 6.0, 8);
    FluidState s{0.9, Vec3(0.2, 0.0, -0.1), 1.2};
    NullSpace P(g, s);
    Vec sq = sqrt_maxwellian(g, s);
    CHECK((P.project(sq) - sq).cwiseAbs().maxCoeff() <= 1e-12 * sq.maxCoeff());
    Vec f = Vec::LinSpaced(g.size(), -1.0, 3.0);
    CHECK((P.project(P.project(f)) - P.project(f)).cwiseAbs().maxCoeff() <= 1e-12 * f.cwiseAbs().maxCoeff());
  }

  TEST_CASE("Burnett function values and orthogonality") {
    auto g = build_grid(24, 8.0, 8);
    FluidState s;
    auto b = burnett(g, s);
    Vec sq = sqrt_maxwellian(g, s);
    // A_11 = (v_1^2 - |v|^2 / 3) sqrt(M) at the standard state; at v = (1,0,0)
    // this is (2/3) (2 pi)^{-3/4} e^{-1/4}
    for (int k : {0, 1000, 6000}) {
      const Vec3 v = g.node(k);
      CHECK(b.A[0][0][k] == doctest::Approx((v[0] * v[0] - v.squaredNorm() / 3.0) * sq[k]).epsilon(1e-13));
    }
    const double at100 = (1.0 - 1.0 / 3.0) * std::sqrt(maxwellian_at(Vec3(1, 0, 0), s));
    CHECK(at100 == doctest::Approx(2.0 / 3.0 * std::pow(2.0 * kPi, -0.75) * std::exp(-0.25)));
    NullSpace P(g, s);
    CHECK(P.project(b.A[0][0]).cwiseAbs().maxCoeff() <= 1e-8);
    double cross = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) cross = std::max(cross, std::abs(b.A[i][j].dot(b.B[k]) * g.w));
    CHECK(cross <= 1e-8);
  }

  TEST_CASE("pseudo-inverse examples") {
    const auto& g = small_grid();
    const auto& K = *small_kernel();
    FluidState s;
    CHECK(pseudo_inverse_L(Vec::Zero(g.size()), s, K, g).norm() == 0.0);
    auto b = burnett(g, s);
    Vec A11 = NullSpace(g, s).complement(b.A[0][0]);
    Vec back = pseudo_inverse_L(linearized_L(A11, s, K, g), s, K, g);
    CHECK((back - A11).cwiseAbs().maxCoeff() <= 1e-6 * A11.cwiseAbs().maxCoeff());
  }

  TEST_CASE("c0 is a lower bound of the Rayleigh quotient") {
    const auto& g = small_grid();
    const auto& K = *small_kernel();
    FluidState s;
    const double c0 = estimate_c0(s, K, g);
    Mat L = dense_L(K, g, s);
    Vec nu = K.nu();
    NullSpace P(g, s);
    std::mt19937_64 rng(23);
    double best = 1e300;
    for (int i = 0; i < 200; ++i) {
      Vec u = random_unit_complement(g, P, rng);
      best = std::min(best, u.dot(L * u) / u.dot(nu.cwiseProduct(u)));
    }
    CHECK(c0 > 0.0);
    CHECK(c0 <= best * (1.0 + 1e-12));
  }
}

TEST_SUITE("euler") {
  TEST_CASE("profile examples") {
    auto f = manufactured_state("gauss-density", 0.0, 50, 4.0);
    for (int i = 0; i < f.nx(); ++i) {
      CHECK(f.rho[i] == 1.0);
      CHECK(f.u3[i] == 0.0);
      CHECK(f.T[i] == 1.0);
    }
    auto s = manufactured_state("tangential-shear", 0.1, 50, 4.0);
    for (int i = 0; i < s.nx(); ++i) CHECK(s.u3[i] == 0.0);
    auto r = euler_time_derivative(manufactured_state("uniform", 0.0, 50, 4.0));
    for (int i = 0; i < 50; ++i) CHECK(std::abs(r.u3[i]) + std::abs(r.rho[i]) + std::abs(r.T[i]) == 0.0);
  }
}

TEST_SUITE("interior_expansion") {
  TEST_CASE("transport of a uniform Maxwellian vanishes") {
    const auto& g = small_grid();
    EulerPoint p;
    p.s = FluidState{1.3, Vec3(0.1, 0.0, 0.0), 0.9};
    Mat T = maxwellian_transport(g, {p, p});
    CHECK(T.cwiseAbs().maxCoeff() == 0.0);
    auto kp = kinetic_part_f1(g, *small_kernel(), {p});
    CHECK(kp.k1.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("perpendicular sources of a manufactured kinetic part") {
    // k = phi(x) A_33 at the standard state: tau_3 = phi <A_33, A_33> with
    // <A_33, A_33> = 4/3, so F_u3 = -(4/3) phi'
    auto g = build_grid(24, 8.0, 8);
    FluidState s;
    auto b = burnett(g, s);
    const int n = 81;
    const double dx = 0.025;
    std::vector<EulerPoint> pts(n);
    Mat k(g.size(), n);
    for (int j = 0; j < n; ++j) {
      pts[j].x = j * dx;
      pts[j].s = s;
      k.col(j) = std::sin(pts[j].x) * b.A[2][2];
    }
    auto fm = flux_moments(g, pts, k);
    CHECK(fm.tau3[10] == doctest::Approx(std::sin(pts[10].x) * 4.0 / 3.0).epsilon(1e-9));
    auto ps = perp_sources(fm, pts, dx);
    for (int j = 5; j < n - 5; j += 7) CHECK(ps.Fu3[j] == doctest::Approx(-4.0 / 3.0 * std::cos(pts[j].x)).epsilon(1e-6));
    auto zero = perp_sources(flux_moments(g, pts, Mat::Zero(g.size(), n)), pts, dx);
    for (int j = 0; j < n; ++j) CHECK(zero.Fu3[j] == 0.0);
  }

  TEST_CASE("linear hyperbolic system") {
    auto init = manufactured_state("gauss-density", 0.1, 100, 4.0);
    auto zero = solve_linear_hyperbolic(init, 0.4, {0.0, 0.05, 0.1}, FluxTable{}, {}, zero_correction(init));
    for (const auto& c : zero.correction)
      for (int i = 0; i < c.nx(); ++i) CHECK(std::abs(c.rho1[i]) + std::abs(c.u1_3[i]) + std::abs(c.theta1[i]) == 0.0);

    // uniform background: acoustics of a density pulse, checked against a
    // run at four times the resolution
    auto pulse = [](int nx) {
      auto u = manufactured_state("uniform", 0.0, nx, 4.0);
      auto c = zero_correction(u);
      for (int i = 0; i < nx; ++i) c.rho1[i] = 0.1 * std::exp(-(c.x[i] - 2.0) * (c.x[i] - 2.0) / 0.1);
      return solve_linear_hyperbolic(u, 0.4, {0.0, 0.2}, FluxTable{}, {}, c).correction.back();
    };
    auto coarse = pulse(100), fine = pulse(400);
    double diff = 0.0, sup = 0.0;
    for (int i = 0; i < coarse.nx(); ++i) {
      const double avg = 0.25 * (fine.rho1[4 * i] + fine.rho1[4 * i + 1] + fine.rho1[4 * i + 2] + fine.rho1[4 * i + 3]);
      diff += (coarse.rho1[i] - avg) * (coarse.rho1[i] - avg) * 0.04;
      sup = std::max(sup, std::abs(coarse.rho1[i]));
    }
    CHECK(std::sqrt(diff) <= 0.04 * 0.1);  // first-order tolerance, dx = 0.04
    CHECK(sup <= 0.1);  // bounded by the data
  }
}

TEST_SUITE("knudsen_layer") {
  TEST_CASE("zero inputs") {
    const auto& g = small_grid();
    FluidState s0;
    auto w = wall_maxwellian(s0.u, s0.T, g);
    Vec sq = sqrt_maxwellian(g, s0);
    Vec z = Vec::Zero(g.size());
    CHECK(diffusive_Dw(z, w, sq, g).norm() == 0.0);
    CHECK(solvability_residual(z, z, sq, g) == 0.0);
    CHECK(boundary_functional_J(g, s0, z, 0.0, 0.0) == 0.0);
    auto xi = make_layer_grid(20.0, 32, 1.15).points();
    auto zero = [](double) { return 0.0; };
    auto co = fluid_layer_coefficients(
        xi, zero, [](double) { return std::array<double, 3>{0, 0, 0}; }, zero, 1.0);
    for (std::size_t p = 0; p < xi.size(); ++p) CHECK(std::abs(co.Psi[p]) + std::abs(co.Theta[p]) == 0.0);
  }

  TEST_CASE("wall Maxwellian matched to the fluid state") {
    auto g = build_grid(16, 6.0, 8);
    FluidState s0{1.3, Vec3(0.2, -0.1, 0.0), 0.85};
    auto w = wall_maxwellian(s0.u, s0.T, g);
    Vec ratio = w.values.cwiseQuotient(maxwellian(g, s0));
    CHECK(ratio.maxCoeff() / ratio.minCoeff() - 1.0 <= 1e-12);
    CHECK(w.rho_w == doctest::Approx(std::sqrt(2.0 * kPi / s0.T)));
  }

  TEST_CASE("wall flux of the explicit layer part") {
    auto g = build_grid(24, 8.0, 8);
    FluidState s0{1.2, Vec3(0.1, 0.0, 0.0), 0.9};
    Vec sq = sqrt_maxwellian(g, s0);
    auto lg = make_layer_grid(20.0, 64, 1.05);
    auto xi = lg.points();
    auto co = fluid_layer_coefficients(
        xi, [](double z) { return std::exp(-z); }, [](double) { return std::array<double, 3>{0, 0, 0}; },
        [](double z) { return 0.3 * std::exp(-2.0 * z); }, s0.T);
    auto f = fluid_layer_part(xi, co, s0, g);
    double flux = 0.0;
    for (int k = 0; k < g.size(); ++k) flux += -g.vz[k] * sq[k] * f.f(k, 0) * g.w;
    CHECK(flux == doctest::Approx(-s0.rho * s0.T * (co.Psi[0] + 5.0 * s0.T * co.Theta[0])).epsilon(1e-6));
    // decays with the data
    CHECK(f.f.col(xi.size() - 1).cwiseAbs().maxCoeff() <= 1e-6 * f.f.col(0).cwiseAbs().maxCoeff());
  }
}

TEST_SUITE("assembler") {
  TEST_CASE("source split for the second layer") {
    const auto& p = smoke_pipeline();
    const auto& b = p.bundle;
    const int m = b.samples() - 1;
    auto src = layer_sources(*p.model, 2, b, m);
    NullSpace P0(b.grid, b.layers[m].s0);
    const double scale = std::max(src.S1.cwiseAbs().maxCoeff(), src.S2.cwiseAbs().maxCoeff());
    Mat a = src.S1, c = src.S2;
    P0.complement_columns(a);
    P0.project_columns(c);
    CHECK(a.cwiseAbs().maxCoeff() <= 1e-10 * scale);
    CHECK(c.cwiseAbs().maxCoeff() <= 1e-10 * scale);
    // e^{xi/4} |S_2| stays bounded along the layer
    auto xi = b.layer_grid.points();
    double peak = 0.0, tail = 0.0;
    for (std::size_t q = 0; q < xi.size(); ++q) {
      const double v = std::exp(xi[q] / 4.0) * src.S2.col(q).cwiseAbs().maxCoeff();
      peak = std::max(peak, v);
      if (xi[q] > 0.8 * xi.back()) tail = std::max(tail, v);
    }
    CHECK(std::isfinite(peak));
    CHECK(tail <= peak);
  }

  TEST_CASE("ansatz mass is linear in the terms") {
    const auto& b = smoke_pipeline().bundle;
    const auto& g = b.grid;
    const int m = 2;
    const double eps = 0.1;
    Mat A = assemble_ansatz(b, m, eps);
    for (int j : {0, 2, 5}) {
      const double xi = b.interior.x[j] / eps;
      double expect = moment(g, b.interior.M[m].col(j), Weight::one());
      expect += eps * moment(g, Vec(b.interior.F1[m].col(j) + b.layer_F(1, m, xi)), Weight::one());
      expect += eps * eps * moment(g, Vec(b.interior.F2[m].col(j) + b.layer_F(2, m, xi)), Weight::one());
      CHECK(moment(g, A.col(j), Weight::one()) == doctest::Approx(expect).epsilon(1e-12));
    }
    for (int s = 0; s < b.samples(); ++s) CHECK(assemble_ansatz(b, s, 0.05).minCoeff() > 0.0);
  }

  TEST_CASE("forcings stay bounded across the sweep") {
    const auto& p = smoke_pipeline();
    std::vector<double> R, Rbb;
    for (double eps : {0.2, 0.1, 0.05}) {
      auto f = remainder_forcings(*p.model, p.bundle, 2, eps);
      Mat sq = p.bundle.interior.M[2].cwiseSqrt();
      R.push_back(f.R.cwiseQuotient(sq).norm());
      Rbb.push_back(f.Rbb.cwiseQuotient(sq).cwiseAbs().maxCoeff());
    }
    for (int i = 0; i < 3; ++i) {
      CHECK(std::isfinite(R[i]));
      CHECK(std::isfinite(Rbb[i]));
    }
    // a surviving 1/eps would grow by four over the sweep
    CHECK(R[2] < 4.0 * R[0]);
    CHECK(Rbb[2] < 4.0 * Rbb[0]);
  }
}

TEST_SUITE("boltzmann_slab") {
  TEST_CASE("diffuse boundary examples") {
    const auto& g = small_grid();
    FluidState s0{1.1, Vec3(0.1, 0.0, 0.0), 1.05};
    auto w = wall_maxwellian(s0.u, s0.T, g);
    Vec M0 = maxwellian(g, s0);
    Vec F = M0;
    apply_diffuse_bc(F, w, g);
    CHECK((F - M0).cwiseAbs().maxCoeff() <= 1e-14 * M0.maxCoeff());
    Vec G = maxwellian(g, FluidState{0.9, Vec3(0, 0, -0.3), 1.2});
    Vec G2 = 2.0 * G;
    apply_diffuse_bc(G, w, g);
    apply_diffuse_bc(G2, w, g);
    for (int k = 0; k < g.size(); ++k)
      if (g.vz[k] > 0.0) CHECK(G2[k] == doctest::Approx(2.0 * G[k]).epsilon(1e-15));
  }

  TEST_CASE("global equilibrium is a fixed point of a step") {
    const auto& g = small_grid();
    CollisionModel Q(g, small_kernel());
    std::vector<double> x;
    for (int j = 0; j <= 16; ++j) x.push_back(0.25 * j);
    BoltzmannSlab slab(Q, x, 0.1);
    FluidState s0{1.0, Vec3(0.2, 0.0, 0.0), 1.0};
    Vec M = maxwellian(g, s0);
    slab.set_wall([&](double) { return s0; });
    slab.set_far([&](double) { return M; });
    KineticState st;
    st.x = x;
    st.F = M.replicate(1, 17);
    const double m0 = st.mass(g);
    slab.step(st, slab.max_dt(st.F));
    CHECK((st.F - M.replicate(1, 17)).cwiseAbs().maxCoeff() <= 1e-12 * M.maxCoeff());
    CHECK(std::abs(st.mass(g) - m0) <= 1e-12 * m0);
  }

  TEST_CASE("norm bounds for a unit remainder") {
    const auto& g = small_grid();
    std::vector<double> x{0.0, 1.0};
    Mat M = maxwellian(g, FluidState{}).replicate(1, 2);
    auto mon = NormMonitor::from_max_temperature(1.0);
    Mat F = M + 0.01 * M.cwiseSqrt();  // eps^2 f_R with g = 1
    auto n = weighted_norms(g, x, F, M, M, 0.1, mon);
    CHECK(std::isfinite(n.linf_h));
    CHECK(n.linf_h > 0.0);
    // h_R = <v>^7 sqrt(M) / sqrt(M_M) with M_M = M(1, 0, T_M)
    double expect = 0.0;
    const FluidState sM{1.0, Vec3::Zero(), mon.T_M};
    for (int k = 0; k < g.size(); ++k) {
      const Vec3 v = g.node(k);
      expect = std::max(expect, std::pow(1.0 + v.squaredNorm(), 3.5) *
                                    std::sqrt(maxwellian_at(v, FluidState{}) / maxwellian_at(v, sM)));
    }
    CHECK(n.linf_h == doctest::Approx(expect).epsilon(1e-10));
  }

  TEST_CASE("dissipation identity at the fixed point") {
    const auto& g = small_grid();
    FluidState s0;
    auto w = wall_maxwellian(s0.u, s0.T, g);
    Vec sq = sqrt_maxwellian(g, s0);
    auto c = boundary_dissipation_check(sq, w, sq, g);
    CHECK(std::abs(c.lhs) <= 1e-12);
    CHECK(std::abs(c.rhs) <= 1e-12);
  }
}

TEST_SUITE("harness") {
  TEST_CASE("synthetic rates") {
    std::vector<double> e{0.2, 0.1, 0.05}, lin, root;
    for (double x : e) {
      lin.push_back(3.0 * x);
      root.push_back(3.0 * std::sqrt(x));
    }
    CHECK(std::abs(fit_rate(e, lin) - 1.0) <= 1e-12);
    CHECK(std::abs(fit_rate(e, root) - 0.5) <= 1e-12);
  }

  TEST_CASE("one record per call and logged solvability") {
    const auto& p = smoke_pipeline();
    SweepRecord r = run_epsilon(p, 0.2);
    CHECK(r.eps == 0.2);
    for (const auto& [name, value] : p.diagnostics)
      if (name == "layer1_solvability") CHECK(value <= 1e-8);
  }
}
