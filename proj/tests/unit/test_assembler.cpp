#include "knudsen/assembler.hpp"

#include "pipeline.hpp"

#include <doctest.h>

#include <cmath>

using namespace kn;

TEST_CASE("wall Taylor coefficients of a polynomial") {
  std::vector<double> x;
  Mat F(1, 10);
  for (int j = 0; j < 10; ++j) {
    x.push_back(0.1 * j);
    F(0, j) = 3.0 - x[j] + 0.5 * x[j] * x[j];
  }
  Mat c = wall_taylor(F, x, 2);
  CHECK(c(0, 0) == doctest::Approx(3.0));
  CHECK(c(0, 1) == doctest::Approx(-1.0));
  CHECK(c(0, 2) == doctest::Approx(1.0));
}

TEST_CASE("ansatz limits") {
  const auto& b = smoke_pipeline().bundle;
  const int m = b.samples() / 2;
  Mat A0 = assemble_ansatz(b, m, 0.0);
  CHECK((A0 - b.interior.M[m]).cwiseAbs().maxCoeff() == 0.0);
  Mat A = assemble_ansatz(b, m, 0.1);
  CHECK((A - b.interior.M[m]).cwiseAbs().maxCoeff() > 0.0);
  // at a sample time the interpolated ansatz is the tabulated one
  for (int j : {0, 3, b.interior.nodes() - 1})
    CHECK((ansatz_at(b, b.interior.times[m], 0.1, j) - A.col(j)).cwiseAbs().maxCoeff() < 1e-13);
  FluidState w = wall_state_at(b, b.interior.times[m]);
  CHECK(std::abs(w.u[2]) < 1e-12);
}

TEST_CASE("layer sources and solvability") {
  const auto& p = smoke_pipeline();
  const auto& b = p.bundle;
  auto s1 = layer_sources(*p.model, 1, b, 0);
  CHECK(s1.S1.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s1.S2.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& L : b.layers) {
    CHECK(std::abs(L.solvability1) < 1e-12);
    CHECK(L.bvp1.residual < 1e-8);
    CHECK(L.bvp2.residual < 1e-8);
  }
  // the first layer decays: nothing is left at the far end
  CHECK(b.layer_F(1, 0, 1e3).norm() == 0.0);
}

TEST_CASE("forcings vanish with the expansion") {
  RunConfig c = smoke_config("flat");
  c.euler_amplitude = 0.0;
  auto p = prepare_pipeline(c);
  auto r = remainder_forcings(*p->model, p->bundle, 2, 0.1);
  CHECK(r.R.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(r.Rbb.cwiseAbs().maxCoeff() < 1e-10);
  CHECK((r.Rbb_lo.array() <= r.Rbb_hi.array()).all());
}

TEST_CASE("bundle archive round trip") {
  const auto& b = smoke_pipeline().bundle;
  auto path = (scratch_dir("bundle") / "b.knb").string();
  save_bundle(b, path);
  auto c = load_bundle(path);
  CHECK(c.grid.same_as(b.grid));
  REQUIRE(c.samples() == b.samples());
  for (int m = 0; m < b.samples(); ++m) {
    CHECK((c.interior.F1[m] - b.interior.F1[m]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((c.interior.F2[m] - b.interior.F2[m]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((c.layers[m].f2.f - b.layers[m].f2.f).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((assemble_ansatz(c, 1, 0.05) - assemble_ansatz(b, 1, 0.05)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS(load_bundle(path + ".missing"));
}
