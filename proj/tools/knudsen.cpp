#include "knudsen/checks.hpp"
#include "knudsen/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

int run_command(const std::string& config_path, const std::string& epsilons, const std::string& out,
                const std::string& preset_name) {
  kn::RunConfig cfg = kn::apply_config(kn::preset(preset_name), kn::Config::load(config_path));
  if (!epsilons.empty()) cfg.epsilons = kn::parse_number_list(epsilons);
  if (!out.empty()) cfg.out_dir = out;
  cfg.validate();

  const auto log = [](const std::string& s) { std::cerr << "[knudsen] " << s << '\n'; };
  const kn::RunSummary s = kn::run_sweep(cfg, log);

  std::printf("%-8s %-14s %-14s %-14s %-14s\n", "eps", "l2_vs_M", "theorem_norm", "remainder_l2", "boundary_res");
  for (const auto& r : s.report.records)
    std::printf("%-8g %-14.6e %-14.6e %-14.6e %-14.6e\n", r.eps, r.l2_vs_maxwellian, r.theorem_norm, r.remainder_l2,
                r.boundary_residual);
  if (s.rates_valid)
    std::printf("slopes: l2_vs_M %.4f  theorem_norm %.4f  remainder_l2 %.4f\n", s.rates.l2_vs_maxwellian,
                s.rates.theorem_norm, s.rates.remainder_l2);
  std::printf("output: %s\n", cfg.out_dir.c_str());
  return 0;
}

int check_command(const std::string& suite, bool full, std::uint64_t seed) {
  kn::CheckOptions opt;
  opt.full = full;
  opt.seed = seed;
  const kn::CheckReport r = kn::run_check_suite(suite, opt);
  std::cout << r.format();
  std::cout << (r.passed() ? "suite passed" : "suite FAILED") << '\n';
  return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hilbert expansion and Knudsen layer toolkit for the Boltzmann equation in a slab"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "expansion, direct solves and the epsilon sweep");
  std::string config, epsilons, out, preset = "default";
  run->add_option("--config", config, "key=value configuration file")->required()->check(CLI::ExistingFile);
  run->add_option("--epsilons", epsilons, "comma-separated, strictly decreasing");
  run->add_option("--out", out, "output directory");
  run->add_option("--preset", preset, "baseline settings: default or smoke");

  auto* check = app.add_subcommand("check", "property suites; exit code 0 iff all pass");
  std::string suite;
  bool full = false;
  std::uint64_t seed = 1;
  check->add_option("--suite", suite, "suite name")->required()->check(CLI::IsMember(kn::check_suites()));
  check->add_flag("--full", full, "include the 24^3 collision test");
  check->add_option("--seed", seed, "random seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return run_command(config, epsilons, out, preset);
    return check_command(suite, full, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
