#pragma once

// Alpha-divergence and extended KL between unnormalized grid measures, and a
// perturbation certificate for the variational characterization of q-paths.

#include <cstdint>
#include <optional>
#include <string>

#include "qpaths/deformed_math.hpp"
#include "qpaths/densities.hpp"

namespace qpaths {

/// 4/(1-a^2) [ (1-a)/2 sum r + (1+a)/2 sum p - sum r^{(1-a)/2} p^{(1+a)/2} ].
/// Throws DomainError at alpha = +-1 or on mismatched grids.
double alpha_divergence(const GridDensity& r, const GridDensity& p, double alpha);

/// sum r log(r/p) - sum r + sum p. Throws DomainError where r > 0 and p = 0.
double extended_kl(const GridDensity& r, const GridDensity& p);

struct DivergenceWeights {
  double beta;
  double alpha;  // 2q - 1

  static DivergenceWeights from_q(double beta, OrderQ q);
  void validate() const;
};

/// (1 - beta) D_alpha[pi0 : r] + beta D_alpha[pi1 : r], endpoints in the first
/// slot. alpha = -1 uses extended_kl(pi_i, r) and alpha = 1 uses extended_kl(r, pi_i).
double variational_objective(const GridDensity& r, const GridDensity& pi0, const GridDensity& pi1,
                             const DivergenceWeights& w);

/// Pointwise q-path grid measure exp_q-mixture of the endpoint masses.
GridDensity qpath_grid(const GridDensity& pi0, const GridDensity& pi1, double beta, OrderQ q);

struct Certificate {
  bool certified = false;
  double objective = 0.0;
  /// max over atoms of |sum_i w_i pi_i^{1-q} - r^{1-q}| (log form at q = 1),
  /// divided by max(1, |sum_i w_i pi_i^{1-q}|).
  double max_residual = 0.0;
  GridDensity candidate;
  std::optional<GridDensity> violation;
  double violation_objective = 0.0;
  double violation_epsilon = 0.0;
};

inline constexpr double kStationarityTolerance = 1e-10;

/// Compares the q-path grid measure against trials x {1e-3, 1e-2, 1e-1}
/// multiplicative log-normal perturbations and checks stationarity.
Certificate certify_argmin(const GridDensity& pi0, const GridDensity& pi1, double beta, OrderQ q,
                           std::size_t trials, std::uint64_t seed = 0);

}  // namespace qpaths
