#include "knudsen/harness.hpp"

#include "pipeline.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

using namespace kn;

TEST_CASE("config parsing") {
  auto c = Config::parse("# comment\n velocity.n = 12 \n\nepsilons=0.2, 0.1,0.05\nrun.sequential = true\nvelocity.n=14\n");
  CHECK(c.get_int("velocity.n", 0) == 14);
  CHECK(c.get_bool("run.sequential", false));
  CHECK(c.get_list("epsilons", {}) == std::vector<double>{0.2, 0.1, 0.05});
  CHECK(c.get_double("missing", 2.5) == 2.5);
  CHECK_THROWS(Config::parse("no equals sign here"));
  CHECK_THROWS(c.require_known({"velocity.n"}));
  CHECK_THROWS(Config::parse("velocity.n = twelve").get_int("velocity.n", 0));
  CHECK_THROWS(Config::load("/nonexistent/file.cfg"));
  for (double v : {0.1, 1.0 / 3.0, 2e-300, 12345.678})
    CHECK(std::stod(format_number(v)) == v);
}

TEST_CASE("run configuration round trip") {
  RunConfig r = preset("smoke");
  r.epsilons = {0.3, 0.15};
  r.correction_ic = "gauss-velocity";
  RunConfig back = apply_config(preset("default"), to_config(r));
  CHECK(back.velocity_n == r.velocity_n);
  CHECK(back.velocity_vmax == r.velocity_vmax);
  CHECK(back.layer_stretch == r.layer_stretch);
  CHECK(back.epsilons == r.epsilons);
  CHECK(back.correction_ic == "gauss-velocity");
  CHECK_NOTHROW(to_config(r).require_known(config_keys()));
  CHECK_THROWS_AS(preset("huge"), std::invalid_argument);
}

TEST_CASE("slab.epsilon selects a single run") {
  RunConfig r = apply_config(preset("default"), Config::parse("slab.epsilon = 0.07"));
  CHECK(r.epsilons == std::vector<double>{0.07});
}

TEST_CASE("invalid configurations are rejected") {
  auto bad = [](const char* text) { return apply_config(preset("smoke"), Config::parse(text)); };
  CHECK_THROWS_AS(bad("velocity.n = 7").validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad("euler.profile = vortex").validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad("epsilons = 0.1,0.2").validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad("slab.t_end = 0.9").validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad("layer.nxi = 8").validate(), std::invalid_argument);
  CHECK_NOTHROW(preset("default").validate());
}

TEST_CASE("rate fit") {
  std::vector<double> e{0.2, 0.1, 0.05};
  CHECK(fit_rate(e, {0.4, 0.2, 0.1}) == doctest::Approx(1.0));
  CHECK(fit_rate(e, {0.04, 0.01, 0.0025}) == doctest::Approx(2.0));
  CHECK(fit_rate(e, {3.0, 3.0, 3.0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS(fit_rate({0.2, 0.1}, {1.0, 0.5}));
  CHECK_THROWS(fit_rate(e, {1.0, 0.0, 0.5}));
}

TEST_CASE("sweep CSV round trip and schema") {
  SweepReport r;
  for (double eps : {0.2, 0.1}) {
    SweepRecord s;
    s.eps = eps;
    s.l2_vs_maxwellian = eps / 3.0;
    s.theorem_norm = std::sqrt(eps);
    s.boundary_residual = 1e-17 * eps;
    s.runtime = 42.0;
    r.records.push_back(s);
  }
  auto dir = scratch_dir("csv");
  auto path = (dir / "sweep.csv").string();
  emit(r, path, preset("smoke"));
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == kSweepSchema);
  auto back = parse_csv(path);
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[1].l2_vs_maxwellian == r.records[1].l2_vs_maxwellian);
  CHECK(back.records[0].boundary_residual == r.records[0].boundary_residual);
  CHECK(back.records[0].runtime == 0.0);
  std::ifstream meta(path + ".meta");
  std::stringstream ms;
  ms << meta.rdbuf();
  CHECK(ms.str().find("velocity.n=8") != std::string::npos);
  CHECK(ms.str().find("seed=1") != std::string::npos);

  // no records: header only
  auto empty = (dir / "empty.csv").string();
  emit_csv(SweepReport{}, empty);
  std::ifstream ein(empty);
  std::string line;
  int lines = 0;
  while (std::getline(ein, line)) ++lines;
  CHECK(lines == 1);
  CHECK(parse_csv(empty).records.empty());
}

TEST_CASE("a flat state gives vanishing errors") {
  RunConfig c = smoke_config("flat_sweep");
  c.euler_amplitude = 0.0;
  c.epsilons = {0.2};
  auto s = run_sweep(c);
  REQUIRE(s.report.records.size() == 1);
  const auto& r = s.report.records[0];
  CHECK(r.l2_vs_maxwellian < 1e-12);
  CHECK(r.l2_vs_ansatz < 1e-12);
  CHECK(r.theorem_norm < 1e-9);
  CHECK(r.remainder_l2 < 1e-10);
  CHECK_FALSE(s.rates_valid);
  for (const char* f : {"sweep.csv", "sweep.csv.meta", "bundle.knb", "layer_k1.csv", "steps_eps0.2.csv", "euler_t0.csv",
                        "correction_t0.02.csv"})
    CHECK_MESSAGE(std::filesystem::exists(std::filesystem::path(c.out_dir) / f), f);
}

TEST_CASE("stage failures name the stage") {
  RunConfig c = smoke_config("bad_stage");
  c.velocity_vmax = 6.0;  // the 8^3 operator is indefinite on this box
  try {
    prepare_pipeline(c);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage == "interior");
  }
}
