#include "knudsen/collision.hpp"
#include "knudsen/linearized.hpp"

#include "common.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

using namespace kn;

namespace {

Vec random_vec(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N01;
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = N01(rng);
  return v;
}

}  // namespace

TEST_CASE("reference kernel: symmetric, null space, nonnegative") {
  const auto& g = small_grid();
  const Mat& L = small_kernel()->matrix();
  CHECK((L - L.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * L.cwiseAbs().maxCoeff());
  Mat E = null_basis(g, FluidState{});
  CHECK((L * E).cwiseAbs().maxCoeff() < 1e-10 * L.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Mat> es(L);
  CHECK(es.eigenvalues()[0] > -1e-10 * es.eigenvalues().maxCoeff());
  CHECK(es.eigenvalues()[5] > 1e-3 * es.eigenvalues().maxCoeff());
}

TEST_CASE("local operator through the state map") {
  const auto& g = small_grid();
  const auto& K = *small_kernel();
  FluidState s{1.4, Vec3(0.2, 0.0, -0.1), 1.1};
  StateMap m(g, s);
  Vec x = random_vec(g.size(), 3);
  Vec y(g.size()), z(g.size());
  m.forward(x.data(), y.data());
  m.inverse(y.data(), z.data());
  CHECK((z - x).norm() < 1e-10 * x.norm());

  Mat D = dense_L(K, g, s);
  Vec gx = linearized_L(x, s, K, g);
  CHECK((D * x - gx).norm() < 1e-10 * gx.norm());
  CHECK((D - D.transpose()).cwiseAbs().maxCoeff() < 1e-10 * D.cwiseAbs().maxCoeff());
  // null functions at the local state
  Mat E = null_basis(g, s);
  CHECK((D * E).cwiseAbs().maxCoeff() < 1e-8 * D.cwiseAbs().maxCoeff());
}

TEST_CASE("pseudo-inverse solves on the complement") {
  const auto& g = small_grid();
  const auto& K = *small_kernel();
  FluidState s{0.8, Vec3(0.0, 0.1, 0.0), 0.9};
  NullSpace P(g, s);
  Vec h = P.complement(random_vec(g.size(), 9));
  Vec x = pseudo_inverse_L(h, s, K, g);
  CHECK((linearized_L(x, s, K, g) - h).norm() < 1e-8 * h.norm());
  CHECK(P.project(x).norm() < 1e-10 * x.norm());
  // data with a null-space component is rejected
  CHECK_THROWS(pseudo_inverse_L(h + null_basis(g, s).col(0), s, K, g));
}

TEST_CASE("coercivity constant") {
  const auto& g = small_grid();
  const auto& K = *small_kernel();
  double c0 = estimate_c0(FluidState{}, K, g);
  CHECK(c0 > 0.0);
  CHECK(c0 < 1.0);
  CHECK(rel_err(estimate_c0(FluidState{3.0, Vec3::Zero(), 1.0}, K, g), c0) < 1e-8);
}

TEST_CASE("kernel cache round trip and key check") {
  const auto& g = small_grid();
  auto path = (std::filesystem::temp_directory_path() / "kn_unit_kernel.bin").string();
  small_kernel()->save(path);
  auto back = LinearizedKernel::load(path, g);
  REQUIRE(back.has_value());
  CHECK((back->matrix() - small_kernel()->matrix()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_FALSE(LinearizedKernel::load(path, build_grid(8, 4.0, 32)).has_value());
  CHECK_THROWS(small_kernel()->check_grid(build_grid(10, 5.0, 32)));
  std::remove(path.c_str());
}

TEST_CASE("collision model: equilibria and first variation") {
  const auto& g = small_grid();
  CollisionModel Q(g, small_kernel());
  FluidState s{1.2, Vec3(0.1, 0.0, 0.0), 0.95};
  Vec M = maxwellian(g, s);
  CHECK(Q.apply(M).cwiseAbs().maxCoeff() < 1e-12 * M.maxCoeff());
  Vec a = sqrt_maxwellian(g, s).cwiseProduct(random_vec(g.size(), 4)) * 1e-3;
  Mat Mm = M, Am = a;
  Mat lin = Q.linear(Mm, Am);
  Vec fd = (Q.apply(Vec(M + 1e-3 * a)) - Q.apply(Vec(M - 1e-3 * a))) / 2e-3;
  CHECK((lin.col(0) - fd).norm() < 1e-5 * fd.norm());
  CHECK(conserved_moments(g, lin.col(0)).cwiseAbs().maxCoeff() < 1e-12);
  Mat q = Q.quadratic(Mm, Am);
  Mat m2 = Q.mixed(Mm, Am, Am);
  CHECK((m2 - 2.0 * q).norm() < 1e-6 * (q.norm() + 1e-300));
}
