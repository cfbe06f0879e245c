#pragma once

// Beta schedules (linear, ESS-adaptive) and selection of q (delta grid,
// ESS heuristic).

#include <cstdint>
#include <span>
#include <vector>

#include "qpaths/paths.hpp"

namespace qpaths {

struct Schedule {
  std::vector<double> betas;

  /// Throws DomainError unless strictly increasing from exactly 0 to exactly 1.
  void validate() const;
  std::size_t steps() const { return betas.empty() ? 0 : betas.size() - 1; }
};

/// K + 1 points t / K.
Schedule linear_schedule(std::size_t K);

/// Particle positions with log-weights and accumulated log-normalizer.
struct ParticleSystem {
  std::vector<Point> positions;
  std::vector<double> log_weights;
  double log_Z_accum = 0.0;
  std::uint64_t rng_seed = 0;
  std::size_t step_index = 0;

  double ess() const;
};

struct AdaptiveStep {
  double beta;
  double ess;
  bool flagged;  // ESS was not monotone on the bracket or tol was not reached
};

/// Smallest beta' in (beta_now, 1] whose incremental-weight ESS is within tol
/// of ess_target, by bisection; 1 when ESS(1) >= ess_target.
/// energies_now holds path energies of cache.points at beta_now.
AdaptiveStep adaptive_next_beta(const AnnealingPath& path, const AnnealingPath::Cache& cache,
                                std::span<const double> energies_now, double beta_now,
                                double ess_target, double tol);
AdaptiveStep adaptive_next_beta(const ParticleSystem& system, const AnnealingPath& path, double beta_now,
                                double ess_target, double tol);

/// count log-spaced delta in [delta_min, delta_max], returned as q = 1 - delta
/// in descending order of q.
std::vector<double> q_grid(std::size_t count = 20, double delta_min = 1e-5, double delta_max = 1e-1);

struct HeuristicConfig {
  std::size_t restarts = 100;
  double log10_sd = 0.1;
  double ess_target_fraction = 0.5;
  std::size_t max_iterations = 50;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
};

struct HeuristicResult {
  double q;
  double beta1;
  double loss;
  double ess;
  bool feasible;
  std::size_t restart;  // index of the winning restart
};

/// (ESS(beta, q) - target)^2 for log-weights log pi_{beta,q}(z_i) - log pi_0(z_i)
/// given log w_i = log pi_1(z_i) - log pi_0(z_i).
double heuristic_loss(std::span<const double> log_ws, double beta, double q, double ess_target);
double heuristic_ess(std::span<const double> log_ws, double beta, double q);

/// Search box of the heuristic: beta in [kBetaMin, 1], log10(1 - q) in [kLog10DeltaMin, 0].
inline constexpr double kHeuristicBetaMin = 1e-6;
inline constexpr double kHeuristicLog10DeltaMin = -12.0;

HeuristicResult ess_heuristic_q(std::span<const double> log_ws, const HeuristicConfig& cfg);

}  // namespace qpaths
