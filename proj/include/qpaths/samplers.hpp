#pragma once

// HMC transition kernel, AIS (forward and reverse), BDMC gap and SMC.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qpaths/paths.hpp"
#include "qpaths/rng.hpp"
#include "qpaths/schedules.hpp"

namespace qpaths {

struct HmcConfig {
  double step_size = 0.5;
  int n_leapfrog = 10;
  Eigen::VectorXd mass;  // diagonal; empty means all ones
  /// Retune step_size at every beta with a short dual-averaging warm-up.
  bool adapt = true;
  double target_accept = 0.65;
  int warmup_iterations = 10;
  /// Each transition draws its step size uniformly from step_size * [1 - jitter, 1 + jitter]
  /// so that trajectory lengths do not lock onto a period of the target.
  double jitter = 0.2;
  /// Draw the number of leapfrog steps uniformly from {1, ..., n_leapfrog}.
  bool random_length = true;
  std::size_t warmup_chains = 32;

  /// Throws DomainError on nonpositive step, leapfrog count or mass entries.
  void validate(int dim) const;
};

struct LeapfrogState {
  Point z;
  Eigen::VectorXd momentum;
  double log_energy = 0.0;
  Eigen::VectorXd grad;
  bool divergent = false;
};

/// n_leapfrog steps of the leapfrog integrator for H = -E(z) + p'M^{-1}p / 2.
LeapfrogState leapfrog(const Point& z, const Eigen::VectorXd& momentum, const BoundEnergy& energy,
                       const HmcConfig& cfg);

struct HmcStep {
  Point z;
  double log_energy;
  bool accepted;
  double accept_prob;
};

/// One Metropolis-corrected HMC transition leaving exp(energy) invariant.
/// Throws DomainError when the energy at z is not finite.
HmcStep hmc_step(const Point& z, const BoundEnergy& energy, const HmcConfig& cfg, Rng& rng);

enum class MoveKernel {
  kHmc,
  /// Metropolis-Hastings with proposals drawn from the base sampler.
  kIndependence,
};

struct MoveConfig {
  MoveKernel kernel = MoveKernel::kHmc;
  HmcConfig hmc;
  int moves_per_step = 1;
};

struct AisResult {
  double log_Z_estimate = 0.0;
  double stderr_estimate = 0.0;
  /// mean of log w over finite chains (negated for reverse runs). A bound in
  /// the same direction as log_Z_estimate, looser but with much lower variance.
  double chain_average_bound = 0.0;
  std::vector<double> per_chain_log_w;
  Schedule schedule_used;
  std::vector<double> acceptance_trace;
  std::vector<double> step_size_trace;
  std::vector<double> ess_trace;
  std::size_t dropped = 0;
  bool reverse = false;
};

/// Forward AIS from base samples; estimates log(Z_1 / Z_0) (a stochastic lower bound).
AisResult ais_forward(const AnnealingPath& path, const Schedule& schedule, std::size_t chains,
                      const MoveConfig& moves, std::uint64_t seed);

/// Reverse AIS from exact target samples; log_Z_estimate = -log-mean-exp of
/// the reverse weights, a stochastic upper bound on log(Z_1 / Z_0).
AisResult ais_reverse(const AnnealingPath& path, const Schedule& schedule,
                      const std::vector<Point>& exact_target_samples, const MoveConfig& moves,
                      std::uint64_t seed);

enum class GapEstimator {
  /// Difference of the log-mean-exp bounds.
  kLogMeanExp,
  /// Difference of the chain-average bounds.
  kChainAverage,
};

/// Upper minus lower bound.
double bdmc_gap(const AisResult& forward, const AisResult& reverse,
                GapEstimator estimator = GapEstimator::kLogMeanExp);

enum class ScheduleMode { kFixed, kAdaptive };

struct SmcConfig {
  std::size_t particles = 1000;
  ScheduleMode mode = ScheduleMode::kAdaptive;
  Schedule schedule;  // used in fixed mode
  double ess_fraction = 0.5;
  double adaptive_tol = 1e-3;  // in ESS units relative to N
  std::size_t max_steps = 100000;
  MoveConfig moves;
  std::uint64_t seed = 0;
};

struct SmcResult {
  double log_Z = 0.0;
  std::vector<double> beta_trace;
  std::vector<double> ess_trace;
  std::vector<double> acceptance_trace;
  std::vector<double> step_size_trace;
  std::vector<int> resampled;
  std::size_t flagged_steps = 0;
  ParticleSystem particles;
};

/// Throws SamplerFailure if every weight collapses.
SmcResult smc_run(const AnnealingPath& path, const SmcConfig& cfg);

/// N indices from one stratified uniform draw.
std::vector<std::size_t> systematic_resample(std::span<const double> log_weights, Rng& rng);
/// Same with the uniform u in [0, 1) supplied.
std::vector<std::size_t> systematic_resample(std::span<const double> log_weights, double u);

/// (sum w)^2 / sum w^2 computed from log-weights.
double ess_of_log_weights(std::span<const double> log_weights);

}  // namespace qpaths
