#include "qpaths/divergences.hpp"

#include <cmath>
#include <vector>

#include "qpaths/error.hpp"
#include "qpaths/parallel.hpp"
#include "qpaths/paths.hpp"
#include "qpaths/rng.hpp"

namespace qpaths {

namespace {

void check_pair(const GridDensity& r, const GridDensity& p) {
  r.validate();
  p.validate();
  if (r.size() != p.size()) throw DomainError("grid measures must share a support");
}

constexpr double kAlphaEdge = 2e-12;

}  // namespace

double alpha_divergence(const GridDensity& r, const GridDensity& p, double alpha) {
  check_pair(r, p);
  if (!std::isfinite(alpha)) throw DomainError("alpha must be finite");
  if (std::fabs(alpha - 1.0) < kAlphaEdge || std::fabs(alpha + 1.0) < kAlphaEdge)
    throw DomainError("alpha = +-1 is the extended KL limit; call extended_kl");
  const double a = 0.5 * (1.0 - alpha), b = 0.5 * (1.0 + alpha);
  double cross = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double ri = r.mass(i), pi = p.mass(i);
    if (ri == 0.0 || pi == 0.0) {
      // 0^x with x <= 0 diverges; a negative exponent on a zero mass is an infinite divergence.
      if ((ri == 0.0 && a < 0.0) || (pi == 0.0 && b < 0.0)) return INFINITY;
      continue;
    }
    cross += std::exp(a * std::log(ri) + b * std::log(pi));
  }
  return 4.0 / (1.0 - alpha * alpha) * (a * r.mass.sum() + b * p.mass.sum() - cross);
}

double extended_kl(const GridDensity& r, const GridDensity& p) {
  check_pair(r, p);
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double ri = r.mass(i), pi = p.mass(i);
    if (ri > 0.0) {
      if (pi == 0.0) throw DomainError("extended KL needs p > 0 wherever r > 0");
      s += ri * std::log(ri / pi);
    }
  }
  return s - r.mass.sum() + p.mass.sum();
}

DivergenceWeights DivergenceWeights::from_q(double beta, OrderQ q) {
  DivergenceWeights w{beta, q.is_unit() ? 1.0 : 2.0 * q.value() - 1.0};
  w.validate();
  return w;
}

void DivergenceWeights::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("divergence weight beta must lie in [0, 1]");
  if (!std::isfinite(alpha)) throw DomainError("alpha must be finite");
}

double variational_objective(const GridDensity& r, const GridDensity& pi0, const GridDensity& pi1,
                             const DivergenceWeights& w) {
  w.validate();
  auto d = [&](const GridDensity& endpoint) {
    if (std::fabs(w.alpha + 1.0) < kAlphaEdge) return extended_kl(endpoint, r);
    if (std::fabs(w.alpha - 1.0) < kAlphaEdge) return extended_kl(r, endpoint);
    return alpha_divergence(endpoint, r, w.alpha);
  };
  double total = 0.0;
  if (w.beta < 1.0) total += (1.0 - w.beta) * d(pi0);
  if (w.beta > 0.0) total += w.beta * d(pi1);
  return total;
}

GridDensity qpath_grid(const GridDensity& pi0, const GridDensity& pi1, double beta, OrderQ q) {
  check_pair(pi0, pi1);
  GridDensity r;
  r.atoms = pi0.atoms;
  r.mass.resize(pi0.mass.size());
  for (std::size_t i = 0; i < pi0.size(); ++i)
    r.mass(i) = std::exp(qpath_log_energy(std::log(pi0.mass(i)), std::log(pi1.mass(i)), beta, q));
  return r;
}

Certificate certify_argmin(const GridDensity& pi0, const GridDensity& pi1, double beta, OrderQ q,
                           std::size_t trials, std::uint64_t seed) {
  check_pair(pi0, pi1);
  for (std::size_t i = 0; i < pi0.size(); ++i)
    if (!(pi0.mass(i) > 0.0 && pi1.mass(i) > 0.0)) throw DomainError("certificate needs positive grids");
  const DivergenceWeights w = DivergenceWeights::from_q(beta, q);

  Certificate c;
  c.candidate = qpath_grid(pi0, pi1, beta, q);
  c.objective = variational_objective(c.candidate, pi0, pi1, w);

  const double k = q.one_minus_q();
  for (std::size_t i = 0; i < pi0.size(); ++i) {
    double lhs, rhs;
    if (q.is_unit()) {
      lhs = (1.0 - beta) * std::log(pi0.mass(i)) + beta * std::log(pi1.mass(i));
      rhs = std::log(c.candidate.mass(i));
    } else {
      lhs = (1.0 - beta) * std::pow(pi0.mass(i), k) + beta * std::pow(pi1.mass(i), k);
      rhs = std::pow(c.candidate.mass(i), k);
    }
    c.max_residual = std::max(c.max_residual, std::fabs(lhs - rhs) / std::max(1.0, std::fabs(lhs)));
  }

  static constexpr double kEpsilons[] = {1e-3, 1e-2, 1e-1};
  const std::size_t n = pi0.size();
  std::vector<double> worst(trials, INFINITY);
  std::vector<int> worst_eps(trials, -1);
  const double slack = 1e-13 * (1.0 + std::fabs(c.objective));
  parallel_for(trials, [&](std::size_t t) {
    Rng rng = Rng::stream(seed, t, 0);
    GridDensity r = c.candidate;
    Eigen::VectorXd noise(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) noise(i) = rng.normal();
    for (int e = 0; e < 3; ++e) {
      for (std::size_t i = 0; i < n; ++i) r.mass(i) = c.candidate.mass(i) * std::exp(kEpsilons[e] * noise(i));
      const double obj = variational_objective(r, pi0, pi1, w);
      if (obj < c.objective - slack && obj < worst[t]) {
        worst[t] = obj;
        worst_eps[t] = e;
      }
    }
  });

  bool violated = false;
  for (std::size_t t = 0; t < trials && !violated; ++t) {
    if (worst_eps[t] < 0) continue;
    violated = true;
    Rng rng = Rng::stream(seed, t, 0);
    GridDensity r = c.candidate;
    for (std::size_t i = 0; i < n; ++i) r.mass(i) = c.candidate.mass(i) * std::exp(kEpsilons[worst_eps[t]] * rng.normal());
    c.violation = r;
    c.violation_objective = worst[t];
    c.violation_epsilon = kEpsilons[worst_eps[t]];
  }
  c.certified = !violated && c.max_residual < kStationarityTolerance;
  return c;
}

}  // namespace qpaths
