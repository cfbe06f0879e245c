#pragma once

// Annealing paths between endpoint densities. Energies are always formed in
// log space from endpoint log-densities.

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qpaths/deformed_math.hpp"
#include "qpaths/densities.hpp"

namespace qpaths {

/// Log-energy and gradient at a fixed beta.
using BoundEnergy = std::function<double(const Point& z, Eigen::VectorXd& grad)>;

class AnnealingPath {
 public:
  virtual ~AnnealingPath() = default;

  virtual std::string kind() const = 0;
  virtual int dim() const = 0;
  virtual const UnnormalizedDensity& base() const = 0;
  virtual const UnnormalizedDensity& target() const = 0;

  /// log pi_beta(z) up to the path normalizer. Throws DomainError for beta outside [0, 1].
  virtual double log_energy(const Point& z, double beta) const = 0;
  /// Same value; writes the gradient in z. The gradient is unspecified when
  /// the value is -inf.
  virtual double log_energy_and_gradient(const Point& z, double beta, Eigen::VectorXd& grad) const = 0;
  virtual BoundEnergy at(double beta) const;

  /// Per-point data reused across many beta for a fixed set of points.
  struct Cache {
    std::span<const Point> points;
    std::vector<double> base_log;
    std::vector<double> target_log;
  };
  virtual Cache prepare(std::span<const Point> points) const;
  virtual void energies(const Cache& cache, double beta, std::span<double> out) const;
};

/// Power-mean path [(1-beta) pi_0^{1-q} + beta pi_1^{1-q}]^{1/(1-q)}; geometric at q = 1.
class QPath final : public AnnealingPath {
 public:
  QPath(UnnormalizedDensity base, UnnormalizedDensity target, OrderQ q);

  std::string kind() const override { return q_.is_unit() ? "geometric" : "qpath"; }
  int dim() const override { return base_.dim(); }
  const UnnormalizedDensity& base() const override { return base_; }
  const UnnormalizedDensity& target() const override { return target_; }
  OrderQ q() const { return q_; }

  double log_energy(const Point& z, double beta) const override;
  double log_energy_and_gradient(const Point& z, double beta, Eigen::VectorXd& grad) const override;
  Cache prepare(std::span<const Point> points) const override;
  void energies(const Cache& cache, double beta, std::span<double> out) const override;

 private:
  UnnormalizedDensity base_;
  UnnormalizedDensity target_;
  OrderQ q_;
};

/// Log q-path energy from endpoint log-densities a = log pi_0(z), b = log pi_1(z).
/// beta = 0 and beta = 1 return a and b exactly.
double qpath_log_energy(double log_base, double log_target, double beta, OrderQ q);

double qpath_log_density(const QPath& p, const Point& z, double beta);
/// Throws DomainError where the energy is -inf.
Eigen::VectorXd qpath_gradient(const QPath& p, const Point& z, double beta);

/// Gaussian (nu = inf) or Student-t endpoints sharing nu.
struct GaussianMomentPath {
  Eigen::VectorXd mu0, mu1;
  Eigen::MatrixXd Sigma0, Sigma1;
  double nu = INFINITY;
};

enum class EscortCovariance {
  /// Sigma_beta matches the exact escort second moments (mixing factor 1).
  kExact,
  /// Sigma_beta with the (nu + 2)/nu mixing factor, as printed for the
  /// escort-moment path; it matches the escort *scale* matrices instead.
  kScaleMatched,
};

struct MomentParams {
  Eigen::VectorXd mu;
  Eigen::MatrixXd Sigma;
};

MomentParams moment_path_params(const GaussianMomentPath& p, double beta,
                                EscortCovariance convention = EscortCovariance::kExact);

/// Moment-averaged (Gaussian) or escort-moment-averaged (Student-t) path.
/// The target endpoint is exp(target_log_scale) times the normalized t_nu(mu1, Sigma1);
/// intermediate energies are log t_nu(z; mu_beta, Sigma_beta) + beta * target_log_scale.
class MomentAveragedPath final : public AnnealingPath {
 public:
  MomentAveragedPath(GaussianMomentPath p, double target_log_scale = 0.0,
                     EscortCovariance convention = EscortCovariance::kExact);

  std::string kind() const override { return std::isinf(p_.nu) ? "moment" : "escort"; }
  int dim() const override { return base_.dim(); }
  const UnnormalizedDensity& base() const override { return base_; }
  const UnnormalizedDensity& target() const override { return target_; }

  double log_energy(const Point& z, double beta) const override;
  double log_energy_and_gradient(const Point& z, double beta, Eigen::VectorXd& grad) const override;
  BoundEnergy at(double beta) const override;
  void energies(const Cache& cache, double beta, std::span<double> out) const override;

 private:
  UnnormalizedDensity intermediate(double beta) const;

  GaussianMomentPath p_;
  double log_scale_;
  EscortCovariance convention_;
  UnnormalizedDensity base_;
  UnnormalizedDensity target_;
};

/// (1 - beta) theta0 + beta theta1.
Eigen::VectorXd same_family_qpath_params(const Eigen::VectorXd& theta0, const Eigen::VectorXd& theta1,
                                         double beta, OrderQ q);

/// g(z) exp_q(theta . phi(z)).
struct QExpFamilyParams {
  UnnormalizedDensity base_measure;
  Eigen::VectorXd theta;
  std::function<Eigen::VectorXd(const Point&)> suff_stats;
  /// d phi / d z, rows indexed like theta; optional (gradient unavailable without it).
  std::function<Eigen::MatrixXd(const Point&)> suff_stats_jacobian;
  OrderQ q{1.0};
};

UnnormalizedDensity make_qexp_family_density(const QExpFamilyParams& params);

/// Throws DomainError unless 0 <= beta <= 1.
void check_beta(double beta);

}  // namespace qpaths
