#include "qpaths/schedules.hpp"

#include <algorithm>
#include <cmath>

#include "qpaths/error.hpp"
#include "qpaths/kernels.hpp"
#include "qpaths/parallel.hpp"

namespace qpaths {

void Schedule::validate() const {
  if (betas.size() < 2) throw DomainError("schedule needs at least two points");
  if (betas.front() != 0.0 || betas.back() != 1.0) throw DomainError("schedule must start at 0 and end at 1");
  for (std::size_t i = 1; i < betas.size(); ++i)
    if (!(betas[i] > betas[i - 1])) throw DomainError("schedule must be strictly increasing");
}

Schedule linear_schedule(std::size_t K) {
  if (K == 0) throw DomainError("linear schedule needs K >= 1");
  Schedule s;
  s.betas.resize(K + 1);
  for (std::size_t t = 0; t <= K; ++t) s.betas[t] = static_cast<double>(t) / static_cast<double>(K);
  s.betas.back() = 1.0;
  return s;
}

double ParticleSystem::ess() const { return kernels::ess_of_log_weights(log_weights); }

namespace {

double incremental_ess(const AnnealingPath& path, const AnnealingPath::Cache& cache,
                       std::span<const double> e_now, double beta, std::vector<double>& e_buf) {
  path.energies(cache, beta, e_buf);
  for (std::size_t i = 0; i < e_buf.size(); ++i)
    e_buf[i] = (e_buf[i] == -INFINITY || e_now[i] == -INFINITY) ? -INFINITY : e_buf[i] - e_now[i];
  const double ess = kernels::ess_of_log_weights(e_buf);
  return std::isnan(ess) ? 0.0 : ess;
}

}  // namespace

AdaptiveStep adaptive_next_beta(const AnnealingPath& path, const AnnealingPath::Cache& cache,
                                std::span<const double> energies_now, double beta_now,
                                double ess_target, double tol) {
  if (!(beta_now >= 0.0 && beta_now < 1.0)) throw DomainError("adaptive step needs beta_now in [0, 1)");
  if (energies_now.size() != cache.points.size()) throw DomainError("energies and particles differ in length");
  std::vector<double> buf(cache.points.size());
  const double ess_one = incremental_ess(path, cache, energies_now, 1.0, buf);
  if (ess_one >= ess_target) return {1.0, ess_one, false};

  double lo = beta_now, hi = 1.0;
  double ess_lo = static_cast<double>(cache.points.size()), ess_hi = ess_one;
  bool flagged = false;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    const double ess_mid = incremental_ess(path, cache, energies_now, mid, buf);
    if (ess_mid > ess_lo || ess_mid < ess_hi) flagged = true;
    if (std::fabs(ess_mid - ess_target) <= tol) return {mid, ess_mid, flagged};
    if (ess_mid > ess_target) {
      lo = mid;
      ess_lo = ess_mid;
    } else {
      hi = mid;
      ess_hi = ess_mid;
    }
  }
  // Bracket collapsed without meeting tol: step to its upper end so beta advances.
  return {hi, ess_hi, true};
}

AdaptiveStep adaptive_next_beta(const ParticleSystem& system, const AnnealingPath& path, double beta_now,
                                double ess_target, double tol) {
  const AnnealingPath::Cache cache = path.prepare(system.positions);
  std::vector<double> e_now(system.positions.size());
  path.energies(cache, beta_now, e_now);
  return adaptive_next_beta(path, cache, e_now, beta_now, ess_target, tol);
}

std::vector<double> q_grid(std::size_t count, double delta_min, double delta_max) {
  if (count == 0) throw DomainError("q grid needs at least one point");
  if (!(delta_min > 0.0 && delta_min < delta_max && delta_max < 1.0))
    throw DomainError("q grid needs 0 < delta_min < delta_max < 1");
  std::vector<double> qs(count);
  if (count == 1) {
    qs[0] = 1.0 - delta_min;
    return qs;
  }
  const double lo = std::log10(delta_min), hi = std::log10(delta_max);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    const double delta = i == 0 ? delta_min : (i + 1 == count ? delta_max : std::pow(10.0, lo + t * (hi - lo)));
    qs[i] = 1.0 - delta;
  }
  return qs;
}

double heuristic_ess(std::span<const double> log_ws, double beta, double q) {
  // log pi_{beta,q}/pi_0 is the path energy between log-densities 0 and log w.
  std::vector<double> zeros(log_ws.size(), 0.0), out(log_ws.size());
  const OrderQ order(q);
  if (beta <= 0.0 || beta >= 1.0 || order.is_unit()) {
    for (std::size_t i = 0; i < log_ws.size(); ++i) out[i] = qpath_log_energy(0.0, log_ws[i], beta, order);
  } else {
    kernels::active().qpath_log_energy(zeros.data(), log_ws.data(), beta, order.one_minus_q(), out.data(),
                                       log_ws.size());
  }
  const double ess = kernels::ess_of_log_weights(out);
  return std::isnan(ess) ? 0.0 : ess;
}

double heuristic_loss(std::span<const double> log_ws, double beta, double q, double ess_target) {
  const double d = heuristic_ess(log_ws, beta, q) - ess_target;
  return d * d;
}

namespace {

struct Candidate {
  double beta;
  double log10_delta;
  double loss;
};

template <class F>
double golden_section(F&& f, double lo, double hi, double tol) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (hi - lo)) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

Candidate coordinate_descent(std::span<const double> log_ws, Candidate x, double target,
                             const HeuristicConfig& cfg) {
  auto loss = [&](double beta, double u) { return heuristic_loss(log_ws, beta, 1.0 - std::pow(10.0, u), target); };
  x.loss = loss(x.beta, x.log10_delta);
  constexpr double kLineTol = 1e-10;
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    const Candidate start = x;
    const double b = golden_section([&](double v) { return loss(v, x.log10_delta); }, kHeuristicBetaMin, 1.0, kLineTol);
    const double lb = loss(b, x.log10_delta);
    if (lb < x.loss) {
      x.beta = b;
      x.loss = lb;
    }
    const double u = golden_section([&](double v) { return loss(x.beta, v); }, kHeuristicLog10DeltaMin, 0.0, kLineTol);
    const double lu = loss(x.beta, u);
    if (lu < x.loss) {
      x.log10_delta = u;
      x.loss = lu;
    }
    const double moved = std::max(std::fabs(x.beta - start.beta), std::fabs(x.log10_delta - start.log10_delta));
    if (moved < cfg.tolerance || x.loss == 0.0) break;
  }
  return x;
}

}  // namespace

HeuristicResult ess_heuristic_q(std::span<const double> log_ws, const HeuristicConfig& cfg) {
  if (log_ws.empty()) throw DomainError("ESS heuristic needs at least one log-weight");
  if (cfg.restarts < 1) throw DomainError("ESS heuristic needs at least one restart");
  if (!(cfg.log10_sd > 0.0)) throw DomainError("restart spread must be positive");
  if (!(cfg.ess_target_fraction > 0.0 && cfg.ess_target_fraction <= 1.0))
    throw DomainError("ESS target fraction must be in (0, 1]");
  for (double lw : log_ws)
    if (std::isnan(lw)) throw DomainError("ESS heuristic got a NaN log-weight");

  const double target = cfg.ess_target_fraction * static_cast<double>(log_ws.size());
  const RhoChoice init = rho_from_log_weights(log_ws);
  const auto [mn, mx] = std::minmax_element(log_ws.begin(), log_ws.end());
  if (*mn == *mx) {
    const double loss = heuristic_loss(log_ws, 1.0, init.q, target);
    return {init.q, 1.0, loss, heuristic_ess(log_ws, 1.0, init.q), false, 0};
  }

  const double log10_rho0 = std::log10(init.rho);
  std::vector<Candidate> results(cfg.restarts);
  parallel_for(cfg.restarts, [&](std::size_t r) {
    Rng rng = Rng::stream(cfg.seed, r, 0);
    const double log10_rho = log10_rho0 + cfg.log10_sd * rng.normal();
    const double u0 = std::clamp(-log10_rho, kHeuristicLog10DeltaMin, 0.0);
    results[r] = coordinate_descent(log_ws, Candidate{1.0, u0, 0.0}, target, cfg);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r)
    if (results[r].loss < results[best].loss) best = r;
  const Candidate& c = results[best];
  const double q = 1.0 - std::pow(10.0, c.log10_delta);
  const double threshold = 0.05 * target;
  return {q, c.beta, c.loss, heuristic_ess(log_ws, c.beta, q), c.loss < threshold * threshold, best};
}

}  // namespace qpaths
