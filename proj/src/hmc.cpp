#include <algorithm>
#include <cmath>

#include "moves.hpp"
#include "qpaths/error.hpp"
#include "qpaths/parallel.hpp"

namespace qpaths {

void HmcConfig::validate(int dim) const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw DomainError("HMC step size must be positive");
  if (n_leapfrog < 1) throw DomainError("HMC needs at least one leapfrog step");
  if (mass.size() != 0) {
    if (mass.size() != dim) throw DomainError("HMC mass dimension does not match the target");
    if (!(mass.array() > 0.0).all() || !mass.allFinite()) throw DomainError("HMC mass entries must be positive");
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw DomainError("target acceptance must be in (0, 1)");
  if (!(jitter >= 0.0 && jitter < 1.0)) throw DomainError("step-size jitter must be in [0, 1)");
}

namespace {

Eigen::VectorXd inverse_mass(const HmcConfig& cfg, Eigen::Index dim) {
  if (cfg.mass.size() == 0) return Eigen::VectorXd::Ones(dim);
  return cfg.mass.cwiseInverse();
}

void integrate(LeapfrogState& s, const BoundEnergy& energy, const HmcConfig& cfg, double eps, int steps) {
  const Eigen::VectorXd minv = inverse_mass(cfg, s.z.size());
  for (int l = 0; l < steps; ++l) {
    s.momentum += 0.5 * eps * s.grad;
    s.z += eps * minv.cwiseProduct(s.momentum);
    s.log_energy = energy(s.z, s.grad);
    if (!std::isfinite(s.log_energy) || !s.grad.allFinite()) {
      s.divergent = true;
      return;
    }
    s.momentum += 0.5 * eps * s.grad;
  }
}

double kinetic(const Eigen::VectorXd& p, const HmcConfig& cfg) {
  return 0.5 * p.cwiseProduct(inverse_mass(cfg, p.size())).dot(p);
}

}  // namespace

LeapfrogState leapfrog(const Point& z, const Eigen::VectorXd& momentum, const BoundEnergy& energy,
                       const HmcConfig& cfg) {
  cfg.validate(static_cast<int>(z.size()));
  LeapfrogState s;
  s.z = z;
  s.momentum = momentum;
  s.log_energy = energy(s.z, s.grad);
  if (!std::isfinite(s.log_energy) || !s.grad.allFinite()) {
    s.divergent = true;
    return s;
  }
  integrate(s, energy, cfg, cfg.step_size, cfg.n_leapfrog);
  return s;
}

namespace detail {

HmcStep hmc_transition(const Point& z, double log_energy, const Eigen::VectorXd& grad,
                       const BoundEnergy& energy, const HmcConfig& cfg, Rng& rng) {
  const Eigen::Index d = z.size();
  LeapfrogState s;
  s.z = z;
  s.grad = grad;
  s.log_energy = log_energy;
  s.momentum.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double m = cfg.mass.size() == 0 ? 1.0 : cfg.mass(i);
    s.momentum(i) = std::sqrt(m) * rng.normal();
  }
  const double h0 = -log_energy + kinetic(s.momentum, cfg);
  const double eps = cfg.step_size * (1.0 + cfg.jitter * (2.0 * rng.uniform() - 1.0));
  const int steps = cfg.random_length
                        ? 1 + static_cast<int>(rng.uniform() * cfg.n_leapfrog)
                        : cfg.n_leapfrog;
  integrate(s, energy, cfg, eps, steps);
  const double u = rng.uniform();
  if (s.divergent) return {z, log_energy, false, 0.0};
  const double h1 = -s.log_energy + kinetic(s.momentum, cfg);
  double accept_prob = std::exp(std::min(0.0, h0 - h1));
  if (std::isnan(accept_prob)) accept_prob = 0.0;
  if (u < accept_prob) return {s.z, s.log_energy, true, accept_prob};
  return {z, log_energy, false, accept_prob};
}

}  // namespace detail

HmcStep hmc_step(const Point& z, const BoundEnergy& energy, const HmcConfig& cfg, Rng& rng) {
  cfg.validate(static_cast<int>(z.size()));
  Eigen::VectorXd g;
  const double e = energy(z, g);
  if (!std::isfinite(e)) throw DomainError("HMC needs a finite energy at the current state");
  return detail::hmc_transition(z, e, g, energy, cfg, rng);
}

namespace detail {

double tune_step_size(const BoundEnergy& energy, const std::vector<Point>& zs,
                      const std::vector<double>& energies, const HmcConfig& cfg, std::uint64_t seed,
                      std::uint64_t step) {
  std::vector<Point> copies;
  for (std::size_t i = 0; i < zs.size() && copies.size() < cfg.warmup_chains; ++i)
    if (std::isfinite(energies[i])) copies.push_back(zs[i]);
  if (copies.empty() || cfg.warmup_iterations < 1) return cfg.step_size;

  std::vector<double> e(copies.size());
  std::vector<Eigen::VectorXd> g(copies.size());
  for (std::size_t j = 0; j < copies.size(); ++j) e[j] = energy(copies[j], g[j]);

  constexpr double kGamma = 0.05, kT0 = 10.0, kKappa = 0.75;
  HmcConfig local = cfg;
  const double mu = std::log(10.0 * cfg.step_size);
  double log_eps = std::log(cfg.step_size);
  double log_eps_bar = log_eps;
  double h_bar = 0.0;
  for (int it = 1; it <= cfg.warmup_iterations; ++it) {
    local.step_size = std::exp(log_eps);
    double acc = 0.0;
    for (std::size_t j = 0; j < copies.size(); ++j) {
      Rng rng = unit_stream(seed, j, step * 64 + static_cast<std::uint64_t>(it), kWarmup);
      const HmcStep r = hmc_transition(copies[j], e[j], g[j], energy, local, rng);
      if (r.accepted) {
        copies[j] = r.z;
        e[j] = energy(copies[j], g[j]);
      }
      acc += r.accept_prob;
    }
    acc /= static_cast<double>(copies.size());
    const double w = 1.0 / (it + kT0);
    h_bar = (1.0 - w) * h_bar + w * (cfg.target_accept - acc);
    log_eps = std::clamp(mu - std::sqrt(static_cast<double>(it)) / kGamma * h_bar, std::log(1e-6), std::log(1e3));
    const double eta = std::pow(static_cast<double>(it), -kKappa);
    log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
  }
  return std::exp(log_eps_bar);
}

SweepStats move_population(const AnnealingPath& path, double beta, std::vector<Point>& zs,
                           std::vector<double>& energies, MoveConfig& moves, std::uint64_t seed,
                           std::uint64_t step) {
  SweepStats stats;
  stats.step_size = moves.hmc.step_size;
  if (moves.moves_per_step < 1 || zs.empty()) return stats;
  const BoundEnergy energy = path.at(beta);
  std::vector<double> accept(zs.size(), 0.0);
  std::vector<char> active(zs.size(), 0);

  if (moves.kernel == MoveKernel::kHmc) {
    if (moves.hmc.adapt) moves.hmc.step_size = tune_step_size(energy, zs, energies, moves.hmc, seed, step);
    stats.step_size = moves.hmc.step_size;
    const HmcConfig cfg = moves.hmc;
    parallel_for(zs.size(), [&](std::size_t i) {
      if (!std::isfinite(energies[i])) return;
      active[i] = 1;
      Rng rng = unit_stream(seed, i, step, kMove);
      Eigen::VectorXd g;
      double e = energy(zs[i], g);
      double acc = 0.0;
      for (int m = 0; m < moves.moves_per_step; ++m) {
        const HmcStep r = hmc_transition(zs[i], e, g, energy, cfg, rng);
        acc += r.accept_prob;
        if (r.accepted) {
          zs[i] = r.z;
          e = energy(zs[i], g);
        }
      }
      energies[i] = e;
      accept[i] = acc / moves.moves_per_step;
    });
  } else {
    const UnnormalizedDensity& base = path.base();
    parallel_for(zs.size(), [&](std::size_t i) {
      if (!std::isfinite(energies[i])) return;
      active[i] = 1;
      Rng rng = unit_stream(seed, i, step, kMove);
      double ratio = energies[i] - base.log_density(zs[i]);
      double acc = 0.0;
      for (int m = 0; m < moves.moves_per_step; ++m) {
        const Point prop = base.sample(rng);
        const double e_prop = path.log_energy(prop, beta);
        const double ratio_prop = e_prop - base.log_density(prop);
        const double log_a = ratio_prop - ratio;
        const double a = std::isnan(log_a) ? 0.0 : std::exp(std::min(0.0, log_a));
        acc += a;
        if (rng.uniform() < a) {
          zs[i] = prop;
          energies[i] = e_prop;
          ratio = ratio_prop;
        }
      }
      accept[i] = acc / moves.moves_per_step;
    });
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < zs.size(); ++i)
    if (active[i]) {
      total += accept[i];
      ++count;
    }
  stats.mean_accept = count > 0 ? total / static_cast<double>(count) : 0.0;
  return stats;
}

}  // namespace detail

}  // namespace qpaths
