#include "knudsen/velocity_grid.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

using namespace kn;

TEST_CASE("grid layout") {
  auto g = build_grid(8, 5.0, 32);
  CHECK(g.size() == 512);
  CHECK(g.h == doctest::Approx(1.25));
  CHECK(g.w == doctest::Approx(1.25 * 1.25 * 1.25));
  CHECK(g.axis.front() == doctest::Approx(-4.375));
  CHECK(g.axis.back() == doctest::Approx(4.375));
  double sw = 0.0;
  for (double w : g.sphere_weights) sw += w;
  CHECK(sw == doctest::Approx(4.0 * std::numbers::pi).epsilon(1e-12));
  for (int k = 0; k < g.size(); ++k) {
    CHECK((g.node(g.mirror(k)) + g.node(k)).norm() < 1e-14);
    Vec3 r = g.node(g.reflect3(k));
    CHECK(r[2] == -g.vz[k]);
    CHECK(r[0] == g.vx[k]);
  }
}

TEST_CASE("grid arguments are validated") {
  CHECK_THROWS_AS(build_grid(7, 5.0, 32), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(8, -1.0, 32), std::invalid_argument);
  CHECK_THROWS_AS(FluidState({0.0, Vec3::Zero(), 1.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(FluidState({1.0, Vec3::Zero(), -1.0}).validate(), std::invalid_argument);
}

TEST_CASE("maxwellian moments") {
  auto g = build_grid(24, 8.0, 8);
  FluidState s{1.3, Vec3(0.2, -0.4, 0.1), 0.8};
  Vec M = maxwellian(g, s);
  CHECK(moment(g, M, Weight::one()) == doctest::Approx(1.3).epsilon(1e-9));
  CHECK(moment(g, M, Weight::v(1)) == doctest::Approx(1.3 * -0.4).epsilon(1e-9));
  CHECK(moment(g, M, Weight::rel2(s.u)) == doctest::Approx(3.0 * 1.3 * 0.8).epsilon(1e-9));
  CHECK(std::abs(moment(g, M, Weight::rel(0, s.u))) < 1e-10);
  CHECK(moment(g, M, Weight::user([](const Vec3& v) { return v[2] * v[2]; })) ==
        doctest::Approx(1.3 * (0.8 + 0.01)).epsilon(1e-9));
  Vec sq = sqrt_maxwellian(g, s);
  CHECK((sq.cwiseProduct(sq) - M).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(maxwellian_at(g.node(17), s) == doctest::Approx(M[17]));
}

TEST_CASE("match_moments inverts the discrete moments") {
  auto g = build_grid(12, 6.0, 8);
  FluidState s{0.7, Vec3(0.3, 0.0, -0.2), 1.4};
  auto m = conserved_moments(g, maxwellian(g, s));
  FluidState r = match_moments(g, m);
  CHECK(r.rho == doctest::Approx(s.rho).epsilon(1e-10));
  CHECK(r.T == doctest::Approx(s.T).epsilon(1e-10));
  CHECK((r.u - s.u).norm() < 1e-10);
  CHECK((conserved_moments(g, maxwellian(g, r)) - m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("null-space projection") {
  auto g = build_grid(8, 5.0, 8);
  FluidState s{1.1, Vec3(0.1, 0.2, 0.0), 0.9};
  NullSpace P(g, s);
  Vec f = Vec::NullaryExpr(g.size(), [&](Eigen::Index k) { return std::sin(1.7 * k) * std::exp(-0.1 * (k % 7)); });
  Vec p = P.project(f);
  CHECK((P.project(p) - p).norm() < 1e-12 * f.norm());
  CHECK((P.basis().transpose() * P.complement(f)).cwiseAbs().maxCoeff() < 1e-12 * f.norm());
  Mat B = null_basis(g, s);
  CHECK(B.cols() == 5);
  CHECK((P.complement(B.col(4))).norm() < 1e-12);
  Mat F(g.size(), 2);
  F << f, 2.0 * f;
  P.complement_columns(F);
  CHECK((F.col(0) - P.complement(f)).norm() < 1e-13);
}
