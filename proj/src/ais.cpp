#include <cmath>

#include "moves.hpp"
#include "qpaths/error.hpp"
#include "qpaths/kernels.hpp"
#include "qpaths/parallel.hpp"

namespace qpaths {

namespace {

void check_moves(const AnnealingPath& path, const MoveConfig& moves) {
  if (moves.moves_per_step < 0) throw DomainError("moves per step must be nonnegative");
  if (moves.kernel == MoveKernel::kHmc) moves.hmc.validate(path.dim());
  if (moves.kernel == MoveKernel::kIndependence && !path.base().has_sampler())
    throw DomainError("independence moves need a base sampler");
}

double increment(double e_new, double e_old) {
  if (e_new == -INFINITY || e_old == -INFINITY) return -INFINITY;
  return e_new - e_old;
}

void summarize(AisResult& r) {
  std::vector<double> finite;
  finite.reserve(r.per_chain_log_w.size());
  for (double lw : r.per_chain_log_w)
    if (std::isfinite(lw)) finite.push_back(lw);
  r.dropped = r.per_chain_log_w.size() - finite.size();
  if (finite.empty()) throw SamplerFailure("every AIS chain ended with zero weight");
  const double lme = kernels::log_mean_exp(finite);
  r.log_Z_estimate = r.reverse ? -lme : lme;
  double sum = 0.0;
  for (double lw : finite) sum += lw;
  const double avg = sum / static_cast<double>(finite.size());
  r.chain_average_bound = r.reverse ? -avg : avg;

  // Delta-method standard error of the log of the weight average.
  const double m = kernels::active().max(finite.data(), finite.size());
  double s1 = 0.0, s2 = 0.0;
  kernels::active().exp_moments(finite.data(), m, finite.size(), &s1, &s2);
  const double n = static_cast<double>(finite.size());
  if (finite.size() < 2) {
    r.stderr_estimate = NAN;
  } else {
    const double mean = s1 / n;
    const double var = std::max(0.0, (s2 / n - mean * mean) * n / (n - 1.0));
    r.stderr_estimate = std::sqrt(var / n) / mean;
  }
}

void record_ess(AisResult& r) {
  bool any = false;
  for (double lw : r.per_chain_log_w) any = any || std::isfinite(lw);
  r.ess_trace.push_back(any ? kernels::ess_of_log_weights(r.per_chain_log_w) : 0.0);
}

AisResult run_chain_population(const AnnealingPath& path, const std::vector<double>& betas,
                               std::vector<Point> zs, const MoveConfig& moves, std::uint64_t seed,
                               bool reverse) {
  AisResult r;
  r.reverse = reverse;
  MoveConfig mc = moves;
  const std::size_t n = zs.size();
  r.per_chain_log_w.assign(n, 0.0);
  std::vector<double> e_prev(n), e_new(n);
  path.energies(path.prepare(zs), betas.front(), e_prev);

  for (std::size_t t = 1; t < betas.size(); ++t) {
    path.energies(path.prepare(zs), betas[t], e_new);
    for (std::size_t i = 0; i < n; ++i) r.per_chain_log_w[i] += increment(e_new[i], e_prev[i]);
    record_ess(r);
    if (t + 1 < betas.size()) {
      const detail::SweepStats s = detail::move_population(path, betas[t], zs, e_new, mc, seed, t);
      r.acceptance_trace.push_back(s.mean_accept);
      r.step_size_trace.push_back(s.step_size);
    }
    std::swap(e_prev, e_new);
  }
  summarize(r);
  return r;
}

}  // namespace

AisResult ais_forward(const AnnealingPath& path, const Schedule& schedule, std::size_t chains,
                      const MoveConfig& moves, std::uint64_t seed) {
  schedule.validate();
  check_moves(path, moves);
  if (chains < 1) throw DomainError("AIS needs at least one chain");
  if (!path.base().has_sampler()) throw DomainError("forward AIS needs an exact base sampler");
  std::vector<Point> zs(chains);
  parallel_for(chains, [&](std::size_t i) {
    Rng rng = detail::unit_stream(seed, i, 0, detail::kInit);
    zs[i] = path.base().sample(rng);
  });
  AisResult r = run_chain_population(path, schedule.betas, std::move(zs), moves, seed, false);
  r.schedule_used = schedule;
  return r;
}

AisResult ais_reverse(const AnnealingPath& path, const Schedule& schedule,
                      const std::vector<Point>& exact_target_samples, const MoveConfig& moves,
                      std::uint64_t seed) {
  schedule.validate();
  check_moves(path, moves);
  if (exact_target_samples.empty()) throw DomainError("reverse AIS needs at least one target sample");
  for (const Point& z : exact_target_samples)
    if (z.size() != path.dim()) throw DomainError("target sample dimension does not match the path");
  std::vector<double> betas(schedule.betas.rbegin(), schedule.betas.rend());
  AisResult r = run_chain_population(path, betas, exact_target_samples, moves, seed, true);
  r.schedule_used = schedule;
  return r;
}

double bdmc_gap(const AisResult& forward, const AisResult& reverse, GapEstimator estimator) {
  if (forward.reverse || !reverse.reverse)
    throw DomainError("BDMC gap needs a forward and a reverse result");
  if (estimator == GapEstimator::kChainAverage)
    return reverse.chain_average_bound - forward.chain_average_bound;
  return reverse.log_Z_estimate - forward.log_Z_estimate;
}

}  // namespace qpaths
