#pragma once

// Population moves shared by AIS and SMC.

#include <cstdint>
#include <vector>

#include "qpaths/samplers.hpp"

namespace qpaths::detail {

// Stream purposes mixed into the step counter of Rng::stream.
enum StreamPurpose : std::uint64_t { kInit = 0, kMove = 1, kWarmup = 2, kResample = 3 };

inline Rng unit_stream(std::uint64_t seed, std::uint64_t unit, std::uint64_t step, StreamPurpose purpose) {
  return Rng::stream(seed, unit, step * 4 + purpose);
}

struct SweepStats {
  double mean_accept = 1.0;
  double step_size = 0.0;
};

/// One HMC transition from a state whose energy and gradient are known.
HmcStep hmc_transition(const Point& z, double log_energy, const Eigen::VectorXd& grad,
                       const BoundEnergy& energy, const HmcConfig& cfg, Rng& rng);

/// Dual-averaging warm-up on copies of up to cfg.warmup_chains finite-energy units.
double tune_step_size(const BoundEnergy& energy, const std::vector<Point>& zs,
                      const std::vector<double>& energies, const HmcConfig& cfg, std::uint64_t seed,
                      std::uint64_t step);

/// Applies moves_per_step transitions targeting the path at beta to every
/// unit with finite energy; energies are refreshed in place. HMC step size in
/// `moves` is updated when adaptation is on.
SweepStats move_population(const AnnealingPath& path, double beta, std::vector<Point>& zs,
                           std::vector<double>& energies, MoveConfig& moves, std::uint64_t seed,
                           std::uint64_t step);

}  // namespace qpaths::detail
