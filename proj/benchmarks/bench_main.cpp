#include "knudsen/boltzmann_slab.hpp"
#include "knudsen/collision.hpp"

#include <benchmark/benchmark.h>

#include <memory>

using namespace kn;

namespace {

const VelocityGrid& grid8() {
  static const VelocityGrid g = build_grid(8, 5.0, 32);
  return g;
}

std::shared_ptr<const LinearizedKernel> kernel8() {
  static const auto K = std::make_shared<const LinearizedKernel>(LinearizedKernel::assemble(grid8()));
  return K;
}

void BM_bilinear_collision(benchmark::State& st) {
  const VelocityGrid g = build_grid(static_cast<int>(st.range(0)), 5.0, 32);
  const Vec F = maxwellian(g, FluidState{1.0, Vec3(0.2, 0.0, 0.0), 1.1});
  const Vec G = maxwellian(g, FluidState{1.2, Vec3::Zero(), 0.9});
  for (auto _ : st) benchmark::DoNotOptimize(bilinear_collision(g, F, G));
}
BENCHMARK(BM_bilinear_collision)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_apply_L(benchmark::State& st) {
  const auto& g = grid8();
  const int cols = static_cast<int>(st.range(0));
  std::vector<StateMap> maps;
  for (int c = 0; c < cols; ++c) maps.emplace_back(g, FluidState{1.0 + 0.01 * c, Vec3(0.01 * c, 0, 0), 1.0});
  const Mat G = Mat::Random(g.size(), cols);
  const auto K = kernel8();
  for (auto _ : st) benchmark::DoNotOptimize(apply_L(*K, g, maps, G));
  st.SetItemsProcessed(st.iterations() * cols);
}
BENCHMARK(BM_apply_L)->Arg(1)->Arg(32)->Unit(benchmark::kMicrosecond);

void BM_slab_step(benchmark::State& st) {
  const auto& g = grid8();
  CollisionModel Q(g, kernel8());
  const int nx = static_cast<int>(st.range(0));
  std::vector<double> x;
  for (int j = 0; j < nx; ++j) x.push_back(static_cast<double>(j) / nx);
  SlabOptions opt;
  opt.periodic = true;
  BoltzmannSlab slab(Q, x, 0.1, opt);
  KineticState s;
  s.x = x;
  s.F = maxwellian(g, FluidState{1.0, Vec3(0.1, 0, 0), 1.0}).replicate(1, nx);
  const double dt = slab.max_dt(s.F);
  for (auto _ : st) slab.step(s, dt);
}
BENCHMARK(BM_slab_step)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
