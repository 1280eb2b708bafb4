#include "knudsen/boltzmann_slab.hpp"

#include "common.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace kn;

TEST_CASE("diffuse reflection closes the wall flux") {
  const auto& g = small_grid();
  auto w = wall_maxwellian(Vec3(0.1, 0.0, 0.0), 1.1, g);
  Vec F = maxwellian(g, FluidState{1.2, Vec3(0.0, 0.0, -0.2), 0.9});
  apply_diffuse_bc(F, w, g);
  CHECK(std::abs(wall_mass_flux(F, g)) < 1e-14);
  // a wall Maxwellian is a fixed point up to its scale
  Vec Mw = 3.0 * w.values;
  Vec before = Mw;
  apply_diffuse_bc(Mw, w, g);
  CHECK((Mw - before).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("trapezoid node weights") {
  auto w = node_weights({0.0, 0.5, 1.0, 1.5});
  CHECK(w[0] == doctest::Approx(0.25));
  CHECK(w[1] == doctest::Approx(0.5));
  CHECK(w[3] == doctest::Approx(0.25));
  auto p = node_weights({0.0, 0.5, 1.0, 1.5}, true);
  CHECK(p[0] == doctest::Approx(0.5));
}

TEST_CASE("periodic relaxation conserves mass and drives to equilibrium") {
  const auto& g = small_grid();
  CollisionModel Q(g, small_kernel());
  std::vector<double> x;
  for (int j = 0; j < 16; ++j) x.push_back(j / 16.0);
  SlabOptions opt;
  opt.periodic = true;
  BoltzmannSlab slab(Q, x, 0.5, opt);
  KineticState s;
  s.eps = 0.5;
  s.x = x;
  s.F.resize(g.size(), 16);
  for (int j = 0; j < 16; ++j) {
    Vec M = maxwellian(g, FluidState{1.0 + 0.1 * std::sin(2 * M_PI * x[j]), Vec3::Zero(), 1.0});
    Vec B = maxwellian(g, FluidState{1.0, Vec3(0.5, 0, 0), 1.0});
    s.F.col(j) = 0.95 * M + 0.05 * B;
  }
  const double m0 = s.mass(g, true);
  StepStats st;
  slab.advance_to(s, 0.05, &st);
  CHECK(st.steps > 0);
  // clipping of small negative values is the only source of mass change
  CHECK(st.clipped_mass <= 1e-10 * m0);
  CHECK(s.t == doctest::Approx(0.05));
  CHECK(std::abs(s.mass(g, true) - m0 - st.clipped_mass) < 1e-13 * m0);
  CHECK_THROWS(slab.step(s, 10.0 * slab.max_dt(s.F)));
  CHECK(slab.stiffness() > 0.0);
}

TEST_CASE("equilibrium with matching boundaries is stationary") {
  const auto& g = small_grid();
  CollisionModel Q(g, small_kernel());
  std::vector<double> x;
  for (int j = 0; j <= 12; ++j) x.push_back(0.1 * j);
  BoltzmannSlab slab(Q, x, 0.1);
  FluidState s0{1.0, Vec3(0.1, 0.0, 0.0), 1.0};
  Vec M = maxwellian(g, s0);
  slab.set_wall([&](double) { return s0; });
  slab.set_far([&](double) { return M; });
  Mat F = M.replicate(1, 13);
  Mat G = F;
  slab.impose_boundary(G, 0.0);
  CHECK((G - F).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(slab.rhs(F).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("weighted norms") {
  const auto& g = small_grid();
  std::vector<double> x{0.0, 0.5, 1.0};
  Mat M = maxwellian(g, FluidState{}).replicate(1, 3);
  auto mon = NormMonitor::from_max_temperature(1.0);
  CHECK(mon.T_M == doctest::Approx(0.75));
  CHECK_NOTHROW(mon.check(1.0));
  CHECK_THROWS(mon.check(2.0));
  auto z = weighted_norms(g, x, M, M, M, 0.1, mon);
  CHECK(z.l2_f == 0.0);
  CHECK(z.linf_h == 0.0);
  // homogeneity in the deviation
  Mat F = M * 1.01;
  auto a = weighted_norms(g, x, F, M, M, 0.1, mon);
  auto b = weighted_norms(g, x, Mat(M * 1.02), M, M, 0.1, mon);
  CHECK(b.l2_f == doctest::Approx(2.0 * a.l2_f));
  CHECK(a.combined == doctest::Approx(a.l2_f + std::pow(0.1, 1.5) * a.linf_h));
  auto fn = field_norms(g, x, Mat(M * 0.01), M, mon);
  CHECK(fn.l2 == doctest::Approx(0.01 * std::sqrt(1.0 * moment(g, M.col(0), Weight::one()))).epsilon(1e-12));
  auto mb = maxwellian_bounds(g, M, mon.T_M, 0.5);
  Vec MM = maxwellian(g, FluidState{1.0, Vec3::Zero(), mon.T_M});
  CHECK(mb.C1 == doctest::Approx(M.col(0).cwiseQuotient(MM).minCoeff()));
  CHECK(mb.C2 == doctest::Approx(M.col(0).cwiseQuotient(MM.cwiseSqrt()).maxCoeff()));
}

TEST_CASE("boundary dissipation identity") {
  const auto& g = small_grid();
  FluidState s0;
  auto w = wall_maxwellian(s0.u, s0.T, g);
  Vec sq = sqrt_maxwellian(g, s0);
  Vec f = Vec::LinSpaced(g.size(), -1.0, 1.0).cwiseProduct(sq);
  CHECK_THROWS_AS(boundary_dissipation_check(f, w, sq, g), std::invalid_argument);
  Vec D = diffusive_Dw(f, w, sq, g);
  for (int k = 0; k < g.size(); ++k)
    if (g.vz[k] > 0.0) f[k] = D[k];
  auto c = boundary_dissipation_check(f, w, sq, g);
  CHECK(c.residual <= 1e-12 * std::abs(c.lhs));
  CHECK(std::abs(c.B2) < 1e-12);
  CHECK(c.lhs >= 0.0);
}
