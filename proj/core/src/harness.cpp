#include "knudsen/harness.hpp"

#include "knudsen/quadrature.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace kn {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void say(const Logger& log, const std::string& s) {
  if (log) log(s);
}

template <class F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string kernel_path(const RunConfig& c) {
  if (!c.kernel_cache.empty()) return c.kernel_cache;
  return (fs::path(c.out_dir) / ("kernel-" + std::to_string(c.velocity_n) + "-" + format_number(c.velocity_vmax) +
                                 "-" + std::to_string(c.velocity_nsphere) + ".bin"))
      .string();
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (velocity_n < 4 || velocity_n % 2) fail("velocity.n must be even and at least 4");
  if (!(velocity_vmax > 0.0)) fail("velocity.vmax must be positive");
  if (velocity_nsphere < 2) fail("velocity.nsphere must be at least 2");
  if (euler_nx < 16) fail("euler.nx must be at least 16");
  if (!(euler_xmax > 0.0)) fail("euler.xmax must be positive");
  if (!(euler_cfl > 0.0 && euler_cfl <= 1.0)) fail("euler.cfl must lie in (0, 1]");
  if (!(euler_amplitude >= 0.0)) fail("euler.amplitude must be non-negative");
  manufactured_profile(euler_profile, euler_amplitude);
  if (correction_ic != "zero" && correction_ic != "gauss-velocity")
    fail("correction.ic_profile must be zero or gauss-velocity");
  if (!(layer_ximax > 0.0) || layer_nxi < 8 || !(layer_stretch >= 1.0) || !(layer_sigma0 > 0.0))
    fail("layer settings out of range");
  try {
    make_layer_grid(layer_ximax, layer_nxi, layer_stretch, layer_sigma0);
  } catch (const std::invalid_argument& e) {
    fail(std::string("layer grid: ") + e.what());
  }
  if (slab_nx < 8) fail("slab.nx must be at least 8");
  if (!(slab_cfl > 0.0 && slab_cfl <= 1.5)) fail("slab.cfl must lie in (0, 1.5]");
  if (!(slab_t_end > 0.0)) fail("slab.t_end must be positive");
  if (slab_t_end > euler_horizon) fail("slab.t_end exceeds euler.horizon");
  if (!(slab_epsilon > 0.0 && slab_epsilon < 1.0)) fail("slab.epsilon must lie in (0, 1)");
  if (expansion_samples < 5) fail("expansion.samples must be at least 5");
  if (epsilons.empty()) fail("no epsilon values");
  for (size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0 && epsilons[i] < 1.0)) fail("epsilon values must lie in (0, 1)");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) fail("epsilon values must be strictly decreasing");
  }
}

RunConfig preset(const std::string& name) {
  RunConfig r;
  if (name == "default") return r;
  if (name == "smoke") {
    r.velocity_n = 8;
    r.velocity_vmax = 5.0;
    r.euler_nx = 200;
    r.layer_nxi = 32;
    r.layer_stretch = 1.15;
    r.slab_nx = 32;
    r.slab_t_end = 0.02;
    r.expansion_samples = 9;
    return r;
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "velocity.n",      "velocity.vmax",        "velocity.nsphere",  "velocity.cache",    "euler.nx",
      "euler.xmax",      "euler.cfl",            "euler.profile",     "euler.amplitude",   "euler.horizon",
      "correction.ic_profile", "correction.amplitude", "layer.ximax", "layer.nxi",         "layer.stretch",
      "layer.sigma0",    "slab.nx",              "slab.cfl",          "slab.t_end",        "slab.epsilon",
      "expansion.samples", "run.seed",           "run.sequential",    "run.epsilons"};
  return keys;
}

RunConfig apply_config(RunConfig r, const Config& c) {
  c.require_known(config_keys());
  r.velocity_n = c.get_int("velocity.n", r.velocity_n);
  r.velocity_vmax = c.get_double("velocity.vmax", r.velocity_vmax);
  r.velocity_nsphere = c.get_int("velocity.nsphere", r.velocity_nsphere);
  r.kernel_cache = c.get("velocity.cache", r.kernel_cache);
  r.euler_nx = c.get_int("euler.nx", r.euler_nx);
  r.euler_xmax = c.get_double("euler.xmax", r.euler_xmax);
  r.euler_cfl = c.get_double("euler.cfl", r.euler_cfl);
  r.euler_profile = c.get("euler.profile", r.euler_profile);
  r.euler_amplitude = c.get_double("euler.amplitude", r.euler_amplitude);
  r.euler_horizon = c.get_double("euler.horizon", r.euler_horizon);
  r.correction_ic = c.get("correction.ic_profile", r.correction_ic);
  r.correction_amplitude = c.get_double("correction.amplitude", r.correction_amplitude);
  r.layer_ximax = c.get_double("layer.ximax", r.layer_ximax);
  r.layer_nxi = c.get_int("layer.nxi", r.layer_nxi);
  r.layer_stretch = c.get_double("layer.stretch", r.layer_stretch);
  r.layer_sigma0 = c.get_double("layer.sigma0", r.layer_sigma0);
  r.slab_nx = c.get_int("slab.nx", r.slab_nx);
  r.slab_cfl = c.get_double("slab.cfl", r.slab_cfl);
  r.slab_t_end = c.get_double("slab.t_end", r.slab_t_end);
  r.slab_epsilon = c.get_double("slab.epsilon", r.slab_epsilon);
  // an explicit list wins over the single-run key
  if (c.has("run.epsilons"))
    r.epsilons = c.get_list("run.epsilons", r.epsilons);
  else if (c.has("slab.epsilon"))
    r.epsilons = {r.slab_epsilon};
  r.expansion_samples = c.get_int("expansion.samples", r.expansion_samples);
  if (c.has("run.seed")) r.seed = static_cast<std::uint64_t>(std::stoull(c.get("run.seed", "1")));
  r.sequential = c.get_bool("run.sequential", r.sequential);
  return r;
}

Config to_config(const RunConfig& r) {
  Config c;
  c.set("velocity.n", std::to_string(r.velocity_n));
  c.set("velocity.vmax", format_number(r.velocity_vmax));
  c.set("velocity.nsphere", std::to_string(r.velocity_nsphere));
  c.set("velocity.cache", r.kernel_cache);
  c.set("euler.nx", std::to_string(r.euler_nx));
  c.set("euler.xmax", format_number(r.euler_xmax));
  c.set("euler.cfl", format_number(r.euler_cfl));
  c.set("euler.profile", r.euler_profile);
  c.set("euler.amplitude", format_number(r.euler_amplitude));
  c.set("euler.horizon", format_number(r.euler_horizon));
  c.set("correction.ic_profile", r.correction_ic);
  c.set("correction.amplitude", format_number(r.correction_amplitude));
  c.set("layer.ximax", format_number(r.layer_ximax));
  c.set("layer.nxi", std::to_string(r.layer_nxi));
  c.set("layer.stretch", format_number(r.layer_stretch));
  c.set("layer.sigma0", format_number(r.layer_sigma0));
  c.set("slab.nx", std::to_string(r.slab_nx));
  c.set("slab.cfl", format_number(r.slab_cfl));
  c.set("slab.t_end", format_number(r.slab_t_end));
  c.set("slab.epsilon", format_number(r.slab_epsilon));
  c.set("expansion.samples", std::to_string(r.expansion_samples));
  c.set("run.seed", std::to_string(r.seed));
  c.set("run.sequential", r.sequential ? "true" : "false");
  std::string eps;
  for (double e : r.epsilons) eps += (eps.empty() ? "" : ",") + format_number(e);
  c.set("run.epsilons", eps);
  return c;
}

// ---------------------------------------------------------------------------
// pipeline

std::unique_ptr<Pipeline> prepare_pipeline(const RunConfig& cfg, const Logger& log) {
  cfg.validate();
  if (cfg.sequential) Eigen::setNbThreads(1);
  auto p = std::make_unique<Pipeline>();
  p->cfg = cfg;
  auto t0 = std::chrono::steady_clock::now();

  stage("kernel", [&] {
    p->grid = build_grid(cfg.velocity_n, cfg.velocity_vmax, cfg.velocity_nsphere);
    const std::string path = kernel_path(cfg);
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    p->kernel = std::make_shared<const LinearizedKernel>(LinearizedKernel::load_or_assemble(p->grid, path));
    p->model = std::make_unique<CollisionModel>(p->grid, p->kernel);
    return 0;
  });
  p->timings.emplace_back("kernel", seconds_since(t0));
  say(log, "kernel ready (" + std::to_string(p->grid.size()) + " velocities)");

  t0 = std::chrono::steady_clock::now();
  const InteriorExpansion interior = stage("interior", [&] {
    InteriorInputs in;
    in.euler_init = manufactured_state(cfg.euler_profile, cfg.euler_amplitude, cfg.euler_nx, cfg.euler_xmax);
    in.euler_cfl = cfg.euler_cfl;
    in.correction_ic = correction_profile(cfg.correction_ic, cfg.correction_amplitude, in.euler_init);
    for (int i = 0; i < cfg.expansion_samples; ++i)
      in.times.push_back(cfg.slab_t_end * i / (cfg.expansion_samples - 1));
    in.x = slab_nodes(cfg.slab_nx, cfg.euler_xmax);
    return build_interior(*p->model, in, InteriorOptions{}, &p->trajectory);
  });
  p->timings.emplace_back("interior", seconds_since(t0));
  p->diagnostics.emplace_back("f1_solvability", interior.f1_solvability);
  p->diagnostics.emplace_back("f2_solvability", interior.f2_solvability);
  say(log, "interior expansion done");

  t0 = std::chrono::steady_clock::now();
  stage("layers", [&] {
    LayerSettings s;
    s.xi_max = cfg.layer_ximax;
    s.cells = cfg.layer_nxi;
    s.stretch = cfg.layer_stretch;
    s.sigma0 = cfg.layer_sigma0;
    p->bundle = build_bundle(*p->model, interior, s);
    return 0;
  });
  p->timings.emplace_back("layers", seconds_since(t0));
  double s1 = 0, s2 = 0, defect = 0, res = 0, far = 0;
  for (const LayerSample& L : p->bundle.layers) {
    s1 = std::max(s1, std::abs(L.solvability1));
    s2 = std::max(s2, std::abs(L.solvability2));
    defect = std::max(defect, L.lemma_defect);
    res = std::max({res, L.bvp1.residual, L.bvp2.residual});
    far = std::max({far, L.bvp1.far_state, L.bvp2.far_state});
  }
  p->diagnostics.emplace_back("layer1_solvability", s1);
  p->diagnostics.emplace_back("layer2_solvability", s2);
  p->diagnostics.emplace_back("lemma_defect", defect);
  p->diagnostics.emplace_back("layer_residual", res);
  p->diagnostics.emplace_back("layer_far_state", far);
  // slowest decay of the second layer over the samples, plain and weighted
  double decay = std::numeric_limits<double>::infinity(), decay_w = decay;
  for (const auto& L : p->bundle.layers) {
    try {
      decay = std::min(decay, fit_decay_rate(L.f2));
      decay_w = std::min(decay_w, fit_decay_rate(L.f2, layer_weight(p->grid, L.s0)));
    } catch (const std::domain_error&) {
      // profile below the fit floor everywhere
    }
  }
  p->diagnostics.emplace_back("layer2_decay", decay);
  p->diagnostics.emplace_back("layer2_decay_weighted", decay_w);
  say(log, "layers done: solvability " + format_number(s1) + " / " + format_number(s2) + ", residual " +
               format_number(res));
  return p;
}

namespace {

// four-point Lagrange interpolation over the sample fields
Mat interpolate_samples(const std::vector<double>& times, const std::vector<Mat>& fields, double t) {
  const InterpStencil st = lagrange_stencil(times, t, std::min<int>(4, static_cast<int>(times.size())));
  Mat out = Mat::Zero(fields[0].rows(), fields[0].cols());
  for (size_t q = 0; q < st.w.size(); ++q) out += st.w[q] * fields[st.start + q];
  return out;
}

}  // namespace

SweepRecord run_epsilon(const Pipeline& p, double eps, const std::string& step_csv, const Logger& log) {
  return stage("slab", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const ExpansionBundle& b = p.bundle;
    const InteriorExpansion& in = b.interior;
    const VelocityGrid& g = p.grid;
    const int ns = in.samples();
    const int last = in.nodes() - 1;

    std::vector<Mat> A(ns);
    for (int m = 0; m < ns; ++m) A[m] = assemble_ansatz(b, m, eps);
    double maxT = 0.0;
    for (const auto& row : in.pts)
      for (const auto& q : row) maxT = std::max(maxT, q.s.T);
    NormMonitor mon = NormMonitor::from_max_temperature(maxT);
    mon.check(maxT);

    BoltzmannSlab S(*p.model, in.x, eps, SlabOptions{p.cfg.slab_cfl});
    S.set_wall([&](double t) { return wall_state_at(b, t); });
    S.set_far([&](double t) { return ansatz_at(b, t, eps, last); });
    KineticState st;
    st.x = in.x;
    st.eps = eps;
    st.F = A[0];

    SweepRecord rec;
    rec.eps = eps;
    auto measure = [&](double t, const Mat& Fa, const Mat& M) {
      const FieldNorms nM = field_norms(g, in.x, st.F - M, M, mon);
      const WeightedNorms nR = weighted_norms(g, in.x, st.F, Fa, M, eps, mon);
      const FluidState s0 = wall_state_at(b, t);
      const Vec sq0 = sqrt_maxwellian(g, s0);
      const Vec fR = ((st.F.col(0) - Fa.col(0)) / (eps * eps)).cwiseQuotient(sq0);
      const double br = boundary_dissipation(fR, wall_maxwellian(s0.u, s0.T, g), sq0, g).residual;
      rec.l2_vs_maxwellian = std::max(rec.l2_vs_maxwellian, nM.l2);
      rec.linf_vs_maxwellian = std::max(rec.linf_vs_maxwellian, nM.linf);
      rec.theorem_norm = std::max(rec.theorem_norm, nM.l2 + nM.linf);
      rec.l2_vs_ansatz = std::max(rec.l2_vs_ansatz, nR.l2_f * eps * eps);
      rec.remainder_l2 = std::max(rec.remainder_l2, nR.l2_f);
      rec.remainder_linf_h = std::max(rec.remainder_linf_h, nR.linf_h);
      rec.boundary_residual = std::max(rec.boundary_residual, br);
      mon.record({t, st.mass(g), nR.l2_f, nR.linf_h, br});
    };
    measure(0.0, A[0], in.M[0]);

    StepStats stats;
    for (int m = 1; m < ns; ++m) {
      const double span = in.times[m] - st.t;
      const int steps = static_cast<int>(std::ceil(span / S.max_dt(st.F) * (1.0 - 1e-12)));
      const double dt = span / steps;
      const double ta = st.t;
      for (int i = 1; i <= steps; ++i) {
        S.step(st, dt, &stats);
        if (i == steps) {
          st.t = in.times[m];
          measure(st.t, A[m], in.M[m]);
        } else {
          st.t = ta + i * dt;
          measure(st.t, interpolate_samples(in.times, A, st.t), interpolate_samples(in.times, in.M, st.t));
        }
      }
    }
    rec.runtime = seconds_since(t0);
    if (!step_csv.empty()) mon.write_csv(step_csv);
    say(log, "eps " + format_number(eps) + ": " + std::to_string(stats.steps) + " steps, remainder " +
                 format_number(rec.remainder_l2) + ", " + format_number(rec.runtime) + " s");
    return rec;
  });
}

SweepRecord run_pipeline(const RunConfig& cfg, double eps, const Logger& log) {
  const auto p = prepare_pipeline(cfg, log);
  return run_epsilon(*p, eps, {}, log);
}

// ---------------------------------------------------------------------------
// rates and files

double fit_rate(const std::vector<double>& eps, const std::vector<double>& err) {
  if (eps.size() < 3 || eps.size() != err.size()) throw std::invalid_argument("fit_rate: need at least 3 points");
  for (size_t i = 0; i < eps.size(); ++i)
    if (!(eps[i] > 0.0 && err[i] > 0.0)) throw std::domain_error("fit_rate: values must be positive");
  return loglog_slope(eps, err);
}

RateFit fit_rate(const SweepReport& r) {
  std::vector<double> e, a, b, c, d, f;
  for (const auto& x : r.records) {
    e.push_back(x.eps);
    a.push_back(x.l2_vs_maxwellian);
    b.push_back(x.l2_vs_ansatz);
    c.push_back(x.linf_vs_maxwellian);
    d.push_back(x.theorem_norm);
    f.push_back(x.remainder_l2);
  }
  return {fit_rate(e, a), fit_rate(e, b), fit_rate(e, c), fit_rate(e, d), fit_rate(e, f)};
}

const char* const kSweepSchema =
    "eps,l2_vs_maxwellian,l2_vs_ansatz,linf_vs_maxwellian,theorem_norm,remainder_l2,remainder_linf_h,"
    "boundary_residual";

void emit_csv(const SweepReport& r, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << kSweepSchema << '\n';
  for (const auto& x : r.records) {
    const double v[] = {x.eps,          x.l2_vs_maxwellian, x.l2_vs_ansatz,     x.linf_vs_maxwellian,
                        x.theorem_norm, x.remainder_l2,     x.remainder_linf_h, x.boundary_residual};
    for (size_t i = 0; i < std::size(v); ++i) os << (i ? "," : "") << format_number(v[i]);
    os << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

SweepReport parse_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(is, line) || line != kSweepSchema) throw std::runtime_error(path + ": unexpected header");
  SweepReport r;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<double> v = parse_number_list(line);
    if (v.size() != 8) throw std::runtime_error(path + ": wrong column count");
    SweepRecord x;
    x.eps = v[0];
    x.l2_vs_maxwellian = v[1];
    x.l2_vs_ansatz = v[2];
    x.linf_vs_maxwellian = v[3];
    x.theorem_norm = v[4];
    x.remainder_l2 = v[5];
    x.remainder_linf_h = v[6];
    x.boundary_residual = v[7];
    r.records.push_back(x);
  }
  return r;
}

void emit(const SweepReport& r, const std::string& path, const RunConfig& cfg,
          const std::vector<std::pair<std::string, double>>& extra) {
  emit_csv(r, path);
  std::ofstream os(path + ".meta");
  if (!os) throw std::runtime_error("cannot write " + path + ".meta");
  os << "# sweep metadata\n";
  os << "schema=" << kSweepSchema << '\n';
  os << "version=0.1.0\n";
#ifdef __VERSION__
  os << "compiler=" << __VERSION__ << '\n';
#endif
  os << "eigen=" << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << '\n';
  os << "seed=" << cfg.seed << '\n';
  os << "sequential=" << (cfg.sequential ? "true" : "false") << '\n';
  std::string eps;
  for (double e : cfg.epsilons) eps += (eps.empty() ? "" : ",") + format_number(e);
  os << "epsilons=" << eps << '\n';
  os << to_config(cfg).dump();
  for (const auto& x : r.records) os << "runtime_eps" << format_number(x.eps) << '=' << format_number(x.runtime) << '\n';
  for (const auto& [k, v] : extra) os << k << '=' << format_number(v) << '\n';
}

RunSummary run_sweep(const RunConfig& cfg, const Logger& log) {
  cfg.validate();
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  const auto p = prepare_pipeline(cfg, log);

  stage("output", [&] {
    const auto& traj = p->trajectory;
    const size_t ns = traj.euler.size();
    for (size_t m : {size_t(0), ns / 2, ns - 1}) {
      const std::string t = format_number(traj.euler[m].t);
      write_euler_csv(traj.euler[m], (out / ("euler_t" + t + ".csv")).string());
      write_correction_csv(traj.correction[m], (out / ("correction_t" + t + ".csv")).string());
    }
    const LayerSample& L = p->bundle.layers.back();
    const Vec sq = sqrt_maxwellian(p->grid, L.s0);
    write_layer_csv(L.f1, p->grid, sq, (out / "layer_k1.csv").string());
    write_layer_csv(L.f2, p->grid, sq, (out / "layer_k2.csv").string());
    save_bundle(p->bundle, (out / "bundle.knb").string());
    return 0;
  });

  RunSummary s;
  for (double eps : cfg.epsilons)
    s.report.records.push_back(run_epsilon(*p, eps, (out / ("steps_eps" + format_number(eps) + ".csv")).string(), log));

  std::vector<std::pair<std::string, double>> extra = p->diagnostics;
  for (const auto& [k, v] : p->timings) extra.emplace_back("time_" + k, v);
  if (s.report.records.size() >= 3) {
    try {
      s.rates = fit_rate(s.report);
      s.rates_valid = true;
      extra.emplace_back("slope_l2_vs_maxwellian", s.rates.l2_vs_maxwellian);
      extra.emplace_back("slope_theorem_norm", s.rates.theorem_norm);
      extra.emplace_back("slope_remainder_l2", s.rates.remainder_l2);
    } catch (const std::domain_error&) {
      s.rates_valid = false;  // some error column is zero
    }
  }
  emit(s.report, (out / "sweep.csv").string(), cfg, extra);
  return s;
}

}  // namespace kn
