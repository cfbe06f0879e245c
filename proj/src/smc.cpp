#include <cmath>

#include "moves.hpp"
#include "qpaths/error.hpp"
#include "qpaths/kernels.hpp"
#include "qpaths/parallel.hpp"

namespace qpaths {

double ess_of_log_weights(std::span<const double> log_weights) {
  if (log_weights.empty()) throw DomainError("ESS needs at least one weight");
  const double e = kernels::ess_of_log_weights(log_weights);
  if (std::isnan(e)) throw DomainError("ESS needs at least one finite log-weight");
  return e;
}

std::vector<std::size_t> systematic_resample(std::span<const double> log_weights, double u) {
  if (!(u >= 0.0 && u < 1.0)) throw DomainError("systematic resampling needs u in [0, 1)");
  const std::size_t n = log_weights.size();
  if (n == 0) throw DomainError("cannot resample an empty population");
  const double m = kernels::active().max(log_weights.data(), n);
  if (!std::isfinite(m)) throw DomainError("resampling needs at least one finite log-weight");
  std::vector<double> cum(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::exp(log_weights[i] - m);
    cum[i] = acc;
  }
  // Compare u + k against N * cumulative / total so that equal weights map one to one.
  const double scale = static_cast<double>(n) / acc;
  std::vector<std::size_t> idx(n);
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double pos = u + static_cast<double>(k);
    while (j + 1 < n && cum[j] * scale <= pos) ++j;
    idx[k] = j;
  }
  return idx;
}

std::vector<std::size_t> systematic_resample(std::span<const double> log_weights, Rng& rng) {
  return systematic_resample(log_weights, rng.uniform());
}

namespace {

double log_sum_exp_sum(std::span<const double> a, std::span<const double> b, std::vector<double>& scratch) {
  scratch.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    scratch[i] = (a[i] == -INFINITY || b[i] == -INFINITY) ? -INFINITY : a[i] + b[i];
  return kernels::log_sum_exp(scratch);
}

}  // namespace

SmcResult smc_run(const AnnealingPath& path, const SmcConfig& cfg) {
  if (cfg.particles < 2) throw DomainError("SMC needs at least two particles");
  if (!path.base().has_sampler()) throw DomainError("SMC needs an exact base sampler");
  if (!(cfg.ess_fraction > 0.0 && cfg.ess_fraction <= 1.0)) throw DomainError("ESS fraction must be in (0, 1]");
  if (cfg.moves.moves_per_step < 0) throw DomainError("moves per step must be nonnegative");
  if (cfg.moves.kernel == MoveKernel::kHmc) cfg.moves.hmc.validate(path.dim());
  if (cfg.mode == ScheduleMode::kFixed) cfg.schedule.validate();

  const std::size_t n = cfg.particles;
  const double ess_target = cfg.ess_fraction * static_cast<double>(n);
  SmcResult r;
  ParticleSystem& ps = r.particles;
  ps.rng_seed = cfg.seed;
  ps.positions.resize(n);
  ps.log_weights.assign(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    Rng rng = detail::unit_stream(cfg.seed, i, 0, detail::kInit);
    ps.positions[i] = path.base().sample(rng);
  });

  MoveConfig mc = cfg.moves;
  std::vector<double> e_now(n), e_next(n), inc(n), scratch;
  double beta = 0.0;
  r.beta_trace.push_back(0.0);
  std::size_t step = 0;
  while (beta < 1.0) {
    if (++step > cfg.max_steps) throw SamplerFailure("SMC exceeded the maximum number of steps");
    const AnnealingPath::Cache cache = path.prepare(ps.positions);
    path.energies(cache, beta, e_now);

    double beta_next;
    if (cfg.mode == ScheduleMode::kFixed) {
      beta_next = cfg.schedule.betas[step];
    } else {
      const AdaptiveStep a = adaptive_next_beta(path, cache, e_now, beta, ess_target,
                                                cfg.adaptive_tol * static_cast<double>(n));
      beta_next = a.beta;
      if (a.flagged) ++r.flagged_steps;
    }
    path.energies(cache, beta_next, e_next);
    for (std::size_t i = 0; i < n; ++i)
      inc[i] = (e_next[i] == -INFINITY || e_now[i] == -INFINITY) ? -INFINITY : e_next[i] - e_now[i];

    const double before = kernels::log_sum_exp(ps.log_weights);
    const double after = log_sum_exp_sum(ps.log_weights, inc, scratch);
    if (after == -INFINITY || std::isnan(after))
      throw SamplerFailure("SMC weights collapsed at beta = " + std::to_string(beta_next));
    ps.log_Z_accum += after - before;
    ps.log_weights = scratch;
    const double ess = kernels::ess_of_log_weights(ps.log_weights);
    r.ess_trace.push_back(ess);
    r.beta_trace.push_back(beta_next);

    const bool resample = cfg.mode == ScheduleMode::kAdaptive || ess < 0.5 * static_cast<double>(n);
    if (resample) {
      Rng rng = detail::unit_stream(cfg.seed, 0, step, detail::kResample);
      const std::vector<std::size_t> idx = systematic_resample(ps.log_weights, rng);
      std::vector<Point> moved(n);
      std::vector<double> e_moved(n);
      for (std::size_t i = 0; i < n; ++i) {
        moved[i] = ps.positions[idx[i]];
        e_moved[i] = e_next[idx[i]];
      }
      ps.positions = std::move(moved);
      e_next = std::move(e_moved);
      ps.log_weights.assign(n, 0.0);
    }
    r.resampled.push_back(resample ? 1 : 0);

    if (beta_next < 1.0) {
      const detail::SweepStats s = detail::move_population(path, beta_next, ps.positions, e_next, mc, cfg.seed, step);
      r.acceptance_trace.push_back(s.mean_accept);
      r.step_size_trace.push_back(s.step_size);
    }
    beta = beta_next;
    ps.step_index = step;
  }
  r.log_Z = ps.log_Z_accum;
  return r;
}

}  // namespace qpaths
