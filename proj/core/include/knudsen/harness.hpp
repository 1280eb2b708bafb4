#pragma once

#include "knudsen/boltzmann_slab.hpp"
#include "knudsen/config.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace kn {

struct RunConfig {
  int velocity_n = 16;
  double velocity_vmax = 6.0;
  int velocity_nsphere = 32;
  std::string kernel_cache;  // empty: <out>/kernel-<n>-<vmax>-<nsphere>.bin

  int euler_nx = 1000;
  double euler_xmax = 4.0;
  double euler_cfl = 0.4;
  std::string euler_profile = "gauss-density";
  double euler_amplitude = 0.1;
  double euler_horizon = 0.5;  // runs may not go beyond this time

  std::string correction_ic = "zero";
  double correction_amplitude = 0.1;

  double layer_ximax = 20.0;
  int layer_nxi = 64;
  double layer_stretch = 1.05;
  double layer_sigma0 = 0.95;

  int slab_nx = 64;
  double slab_cfl = 0.5;
  double slab_t_end = 0.1;
  double slab_epsilon = 0.1;

  int expansion_samples = 21;

  std::vector<double> epsilons{0.2, 0.1, 0.05};
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  bool sequential = false;  // single-threaded linear algebra

  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

// Names: "default" (16^3 velocities, 64 slab intervals, eps 0.2/0.1/0.05 to
// t = 0.1) and "smoke" (8^3, small grids, short time).
RunConfig preset(const std::string& name);
const std::vector<std::string>& config_keys();
// Keys present in c override base.
RunConfig apply_config(RunConfig base, const Config& c);
Config to_config(const RunConfig& r);

struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error("stage " + stage + ": " + what), stage(stage) {}
  std::string stage;
};

// epsilon-independent part of a run: grids, kernel, Euler trajectory and the
// expansion bundle
struct Pipeline {
  RunConfig cfg;
  VelocityGrid grid;
  std::shared_ptr<const LinearizedKernel> kernel;
  std::unique_ptr<CollisionModel> model;
  HyperbolicResult trajectory;
  ExpansionBundle bundle;
  std::vector<std::pair<std::string, double>> diagnostics;  // name, value
  std::vector<std::pair<std::string, double>> timings;      // stage, seconds
};

using Logger = std::function<void(const std::string&)>;

std::unique_ptr<Pipeline> prepare_pipeline(const RunConfig& cfg, const Logger& log = {});

struct SweepRecord {
  double eps = 0.0;
  double l2_vs_maxwellian = 0.0;   // sup_t ||(F - M)/sqrt M||_2
  double l2_vs_ansatz = 0.0;       // sup_t ||(F - F_approx)/sqrt M||_2
  double linf_vs_maxwellian = 0.0; // sup_t ||<v>^l (F - M)/sqrt M_M||_inf
  double theorem_norm = 0.0;       // sup_t of the sum of the two norms against M
  double remainder_l2 = 0.0;       // sup_t ||f_R||_2, F_R = (F - F_approx)/eps^2
  double remainder_linf_h = 0.0;   // sup_t ||h_R||_inf (without the eps^{3/2})
  double boundary_residual = 0.0;  // sup_t of the wall identity residual of f_R
  double runtime = 0.0;            // seconds; kept out of the CSV
};

struct SweepReport {
  std::vector<SweepRecord> records;
};

// Direct solve at one eps on the prepared pipeline. The per-step log goes to
// step_csv when it is not empty.
SweepRecord run_epsilon(const Pipeline& p, double eps, const std::string& step_csv = {}, const Logger& log = {});
// prepare_pipeline followed by run_epsilon.
SweepRecord run_pipeline(const RunConfig& cfg, double eps, const Logger& log = {});

struct RateFit {
  double l2_vs_maxwellian = 0.0, l2_vs_ansatz = 0.0, linf_vs_maxwellian = 0.0, theorem_norm = 0.0,
         remainder_l2 = 0.0;
};
// Least-squares slopes of log(error) against log(eps); needs three records.
RateFit fit_rate(const SweepReport& r);
double fit_rate(const std::vector<double>& eps, const std::vector<double>& err);

// Column order of the sweep CSV.
extern const char* const kSweepSchema;
void emit_csv(const SweepReport& r, const std::string& path);
SweepReport parse_csv(const std::string& path);
// CSV plus <path>.meta with the config echo, versions, seed and timings.
void emit(const SweepReport& r, const std::string& path, const RunConfig& cfg,
          const std::vector<std::pair<std::string, double>>& extra = {});

struct RunSummary {
  SweepReport report;
  RateFit rates;
  bool rates_valid = false;
};
// Full sweep: outputs (CSV, metadata, snapshots, layer profiles, step logs,
// bundle archive) under cfg.out_dir.
RunSummary run_sweep(const RunConfig& cfg, const Logger& log = {});

}  // namespace kn
