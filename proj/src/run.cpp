#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>
#include <set>

#include "qpaths/cli_io.hpp"
#include "qpaths/error.hpp"
#include "qpaths/kernels.hpp"
#include "qpaths/parallel.hpp"
#include "qpaths/paths.hpp"
#include "qpaths/samplers.hpp"
#include "qpaths/schedules.hpp"

namespace qpaths {

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : "; ") + x;
  return s;
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
  for (const char* o : options)
    if (v == o) return true;
  return false;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid configuration: " + join(problems)), problems_(std::move(problems)) {}

std::vector<std::string> RunConfig::violations() const {
  std::vector<std::string> v;
  const bool known_command = one_of(command, {"anneal-toy", "smc", "ais", "bdmc", "heuristic-q", "grid-q"});
  if (!known_command) v.push_back("command: unknown '" + command + "'");
  if (!one_of(path_kind, {"geometric", "qpath", "moment", "escort"})) v.push_back("path-kind: unknown '" + path_kind + "'");
  if (!one_of(schedule, {"linear", "adaptive"})) v.push_back("schedule: unknown '" + schedule + "'");
  if (!one_of(toy, {"gaussian", "student"})) v.push_back("toy: unknown '" + toy + "'");
  const bool chooses_q = command == "heuristic-q" || command == "grid-q";
  if (path_kind == "qpath" && !chooses_q && !q) v.push_back("q: required for path-kind qpath");
  if (q && !std::isfinite(*q)) v.push_back("q: must be finite");
  if (particles < 2) v.push_back("particles: need at least 2");
  if (K < 1) v.push_back("K: need at least 1");
  if (moves < 0) v.push_back("moves: must be nonnegative");
  if (command == "smc" && !dataset) v.push_back("dataset: required for smc");
  if (schedule == "adaptive" && command != "smc" && !(command == "grid-q" && dataset))
    v.push_back("schedule: adaptive schedules are only available for SMC runs");
  if (command == "bdmc" && dataset) v.push_back("dataset: bdmc needs exact target samples and runs on the toy endpoints only");
  if (path_kind == "moment" && (toy != "gaussian" || dataset))
    v.push_back("path-kind: moment needs Gaussian toy endpoints");
  if (path_kind == "escort" && (toy != "student" || dataset))
    v.push_back("path-kind: escort needs Student-t toy endpoints");
  if ((path_kind == "moment" || path_kind == "escort") && chooses_q)
    v.push_back("path-kind: q selection applies to q-paths only");
  if (!std::isfinite(mu0) || !std::isfinite(mu1)) v.push_back("mu0/mu1: must be finite");
  if (!(var0 > 0.0) || !std::isfinite(var0)) v.push_back("var0: must be positive");
  if (!(var1 > 0.0) || !std::isfinite(var1)) v.push_back("var1: must be positive");
  if (!(nu > 0.0)) v.push_back("nu: must be positive");
  if (!std::isfinite(log_scale)) v.push_back("log-scale: must be finite");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) v.push_back("step-size: must be positive");
  if (n_leapfrog < 1) v.push_back("n-leapfrog: need at least 1");
  if (!(ess_fraction > 0.0 && ess_fraction <= 1.0)) v.push_back("ess-fraction: must be in (0, 1]");
  if (restarts < 1) v.push_back("restarts: need at least 1");
  if (grid_count < 1) v.push_back("grid-count: need at least 1");
  if (!(delta_min > 0.0 && delta_min < delta_max && delta_max < 1.0))
    v.push_back("delta-min/delta-max: need 0 < delta-min < delta-max < 1");
  if (output.empty()) v.push_back("output: must be a file path");
  return v;
}

namespace {

struct Problem {
  std::unique_ptr<UnnormalizedDensity> base, target;
  std::optional<GaussianMomentPath> moments;
  std::optional<double> true_log_Z;
};

Problem make_problem(const RunConfig& c) {
  Problem p;
  if (c.dataset) {
    const LoadedDataset data = load_binary_regression_csv(*c.dataset);
    PosteriorPair pair = make_logistic_posterior(data.model);
    p.base = std::make_unique<UnnormalizedDensity>(pair.prior);
    p.target = std::make_unique<UnnormalizedDensity>(pair.target);
    return p;
  }
  GaussianMomentPath m;
  m.mu0 = Eigen::VectorXd::Constant(1, c.mu0);
  m.mu1 = Eigen::VectorXd::Constant(1, c.mu1);
  m.Sigma0 = Eigen::MatrixXd::Constant(1, 1, c.var0);
  m.Sigma1 = Eigen::MatrixXd::Constant(1, 1, c.var1);
  m.nu = c.toy == "gaussian" ? INFINITY : c.nu;
  const UnnormalizedDensity t = make_student_t({m.mu1, m.Sigma1, m.nu});
  p.base = std::make_unique<UnnormalizedDensity>(make_student_t({m.mu0, m.Sigma0, m.nu}));
  p.target = std::make_unique<UnnormalizedDensity>(c.log_scale == 0.0 ? t : scaled(t, c.log_scale));
  p.moments = m;
  p.true_log_Z = c.log_scale;
  return p;
}

std::unique_ptr<AnnealingPath> make_path(const RunConfig& c, const Problem& p, std::optional<double> q_override = {}) {
  if (c.path_kind == "moment" || c.path_kind == "escort")
    return std::make_unique<MomentAveragedPath>(*p.moments, c.log_scale);
  const double q = q_override ? *q_override : (c.path_kind == "geometric" ? 1.0 : c.q.value_or(1.0));
  return std::make_unique<QPath>(*p.base, *p.target, OrderQ(q));
}

MoveConfig move_config(const RunConfig& c) {
  MoveConfig m;
  m.moves_per_step = c.moves;
  m.hmc.step_size = c.step_size;
  m.hmc.n_leapfrog = c.n_leapfrog;
  return m;
}

void fill_from_ais(RunReport& r, const AisResult& a) {
  r.log_Z = a.log_Z_estimate;
  r.stderr_estimate = a.stderr_estimate;
  r.ess_trace = a.ess_trace;
  r.beta_trace = a.schedule_used.betas;
  r.acceptance_trace = a.acceptance_trace;
  r.extras["dropped_chains"] = static_cast<double>(a.dropped);
}

struct Bdmc {
  AisResult forward, reverse;
  double gap;
  double chain_gap;
};

Bdmc run_bdmc(const AnnealingPath& path, const RunConfig& c, const MoveConfig& mv) {
  const Schedule s = linear_schedule(c.K);
  Bdmc b{ais_forward(path, s, c.particles, mv, c.seed), {}, 0.0, 0.0};
  std::vector<Point> exact(c.particles);
  for (std::size_t i = 0; i < c.particles; ++i) {
    Rng rng = Rng::stream(c.seed, i, 0xB0D);
    exact[i] = path.target().sample(rng);
  }
  b.reverse = ais_reverse(path, s, exact, mv, c.seed + 1);
  b.gap = bdmc_gap(b.forward, b.reverse);
  b.chain_gap = bdmc_gap(b.forward, b.reverse, GapEstimator::kChainAverage);
  return b;
}

SmcConfig smc_config(const RunConfig& c) {
  SmcConfig s;
  s.particles = c.particles;
  s.mode = c.schedule == "adaptive" ? ScheduleMode::kAdaptive : ScheduleMode::kFixed;
  if (s.mode == ScheduleMode::kFixed) s.schedule = linear_schedule(c.K);
  s.ess_fraction = c.ess_fraction;
  s.moves = move_config(c);
  s.seed = c.seed;
  return s;
}

void fill_from_smc(RunReport& r, const SmcResult& s) {
  r.log_Z = s.log_Z;
  r.stderr_estimate = NAN;
  r.ess_trace = s.ess_trace;
  r.beta_trace = s.beta_trace;
  r.acceptance_trace = s.acceptance_trace;
  r.extras["steps"] = static_cast<double>(s.beta_trace.size() - 1);
  r.extras["flagged_steps"] = static_cast<double>(s.flagged_steps);
}

std::string grid_report_path(const std::string& output, std::size_t i) {
  std::filesystem::path p(output);
  const std::string stem = p.stem().string();
  const std::string ext = p.has_extension() ? p.extension().string() : ".json";
  return (p.parent_path() / (stem + ".q" + std::to_string(i) + ext)).string();
}

void emit(const RunReport& r, const std::string& path, const std::optional<std::string>& trace_csv) {
  write_file_atomic(path, r.to_json());
  if (trace_csv) write_file_atomic(*trace_csv, traces_to_csv(r));
}

void dispatch(const RunConfig& c, RunReport& r) {
  const Problem p = make_problem(c);
  if (p.true_log_Z) r.extras["true_log_Z"] = *p.true_log_Z;
  const MoveConfig mv = move_config(c);

  if (c.command == "anneal-toy" || c.command == "ais") {
    const auto path = make_path(c, p);
    fill_from_ais(r, ais_forward(*path, linear_schedule(c.K), c.particles, mv, c.seed));
  } else if (c.command == "bdmc") {
    const auto path = make_path(c, p);
    const Bdmc b = run_bdmc(*path, c, mv);
    fill_from_ais(r, b.forward);
    r.extras["lower_bound"] = b.forward.log_Z_estimate;
    r.extras["upper_bound"] = b.reverse.log_Z_estimate;
    r.extras["gap"] = b.gap;
    r.extras["chain_gap"] = b.chain_gap;
  } else if (c.command == "smc") {
    const auto path = make_path(c, p);
    fill_from_smc(r, smc_run(*path, smc_config(c)));
  } else if (c.command == "heuristic-q") {
    std::vector<double> log_w(c.particles);
    for (std::size_t i = 0; i < c.particles; ++i) {
      Rng rng = Rng::stream(c.seed, i, 0x4E55);
      const Point z = p.base->sample(rng);
      log_w[i] = p.target->log_density(z) - p.base->log_density(z);
    }
    HeuristicConfig h;
    h.restarts = c.restarts;
    h.ess_target_fraction = c.ess_fraction;
    h.seed = c.seed;
    const HeuristicResult res = ess_heuristic_q(log_w, h);
    // Plain importance sampling estimate from the same base draws.
    r.log_Z = kernels::log_mean_exp(log_w);
    r.extras["q"] = res.q;
    r.extras["delta"] = 1.0 - res.q;
    r.extras["beta1"] = res.beta1;
    r.extras["loss"] = res.loss;
    r.extras["ess"] = res.ess;
    r.extras["feasible"] = res.feasible ? 1.0 : 0.0;
    r.extras["rho0"] = rho_from_log_weights(log_w).rho;
  } else if (c.command == "grid-q") {
    const std::vector<double> qs = q_grid(c.grid_count, c.delta_min, c.delta_max);
    double best_score = -INFINITY;
    for (std::size_t i = 0; i < qs.size(); ++i) {
      RunConfig ci = c;
      ci.command = c.dataset ? "smc" : "bdmc";
      ci.path_kind = "qpath";
      ci.q = qs[i];
      RunReport ri;
      ri.config_echo = ci;
      const auto path = make_path(ci, p, qs[i]);
      double score;
      if (c.dataset) {
        fill_from_smc(ri, smc_run(*path, smc_config(ci)));
        score = ri.log_Z;
      } else {
        const Bdmc b = run_bdmc(*path, ci, mv);
        fill_from_ais(ri, b.forward);
        ri.extras["lower_bound"] = b.forward.log_Z_estimate;
        ri.extras["upper_bound"] = b.reverse.log_Z_estimate;
        ri.extras["gap"] = b.gap;
        ri.extras["chain_gap"] = b.chain_gap;
        // The chain-average gap ranks q; the log-mean-exp gap is dominated by noise at this scale.
        score = -b.chain_gap;
      }
      ri.extras["q"] = qs[i];
      emit(ri, grid_report_path(c.output, i), std::nullopt);
      r.extras["q" + std::to_string(i)] = qs[i];
      r.extras[(c.dataset ? "log_Z" : "gap") + std::string("_q") + std::to_string(i)] = c.dataset ? ri.log_Z : ri.extras["gap"];
      if (score > best_score) {
        best_score = score;
        r.log_Z = ri.log_Z;
        r.stderr_estimate = ri.stderr_estimate;
        r.ess_trace = ri.ess_trace;
        r.beta_trace = ri.beta_trace;
        r.acceptance_trace = ri.acceptance_trace;
        r.extras["best_q"] = qs[i];
        r.extras["best_delta"] = 1.0 - qs[i];
        r.extras["best_index"] = static_cast<double>(i);
        if (!c.dataset) {
          r.extras["best_gap"] = ri.extras["gap"];
          r.extras["best_chain_gap"] = ri.extras["chain_gap"];
        }
      }
    }
  }
}

}  // namespace

RunReport run(const RunConfig& config) {
  RunConfig c = config;
  if (c.ground_truth) {
    c.particles = std::max<std::size_t>(c.particles, 50000);
    c.moves = 20;
  }
  const std::vector<std::string> problems = c.violations();
  if (!problems.empty()) throw ConfigError(problems);
  if (c.dataset && !std::filesystem::exists(*c.dataset)) throw ConfigError({"dataset: file not found '" + *c.dataset + "'"});
  set_num_threads(c.threads);

  RunReport r;
  r.config_echo = c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    dispatch(c, r);
  } catch (const SamplerFailure& e) {
    r.status = "failed";
    r.error = e.what();
    r.log_Z = NAN;
  }
  r.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  emit(r, c.output, c.trace_csv);
  return r;
}

}  // namespace qpaths
