#pragma once

// Endpoint densities: log-density, gradient, optional exact sampler and known
// log-normalizer.

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "qpaths/rng.hpp"

namespace qpaths {

using Point = Eigen::VectorXd;

class UnnormalizedDensity {
 public:
  struct Spec {
    std::string name;
    int dim = 1;
    std::function<double(const Point&)> log_density;
    /// Returns the log-density and writes its gradient into grad.
    std::function<double(const Point&, Eigen::VectorXd& grad)> value_and_gradient;
    /// Draws from the normalized density; empty when unavailable.
    std::function<Point(Rng&)> sampler;
    /// log of the integral of exp(log_density), when known.
    std::optional<double> log_normalizer;
  };

  explicit UnnormalizedDensity(Spec spec);

  const std::string& name() const { return spec_->name; }
  int dim() const { return spec_->dim; }
  double log_density(const Point& z) const { return spec_->log_density(z); }
  Eigen::VectorXd gradient(const Point& z) const;
  double value_and_gradient(const Point& z, Eigen::VectorXd& grad) const {
    return spec_->value_and_gradient(z, grad);
  }
  bool has_sampler() const { return static_cast<bool>(spec_->sampler); }
  /// Throws DomainError without a sampler.
  Point sample(Rng& rng) const;
  std::optional<double> known_log_normalizer() const { return spec_->log_normalizer; }

 private:
  std::shared_ptr<const Spec> spec_;
};

/// exp(log_c) times the density; the log-normalizer shifts by log_c.
UnnormalizedDensity scaled(const UnnormalizedDensity& f, double log_c);

/// Normalized Gaussian. Throws DomainError unless Sigma is symmetric positive definite.
UnnormalizedDensity make_gaussian(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma);

struct StudentTParams {
  Eigen::VectorXd mu;
  Eigen::MatrixXd Sigma;
  double nu = 1.0;  // +inf gives the Gaussian limit
};

/// Normalized multivariate Student-t.
UnnormalizedDensity make_student_t(const StudentTParams& p);

double q_from_nu(double nu, int d);
/// Throws DomainError for q <= 1 or when the implied nu is not positive.
double nu_from_q(double q, int d);

struct ParetoParams {
  double x_min = 0.0;
  double sigma = 1.0;
  double xi = 0.0;
};

/// 1-d generalized Pareto; -inf log-density outside the support.
UnnormalizedDensity make_pareto(const ParetoParams& p);

/// Throws DomainError at xi = -1.
double q_from_xi(double xi);
/// Throws DomainError at q = 2.
double xi_from_q(double q);

struct LogisticModel {
  Eigen::MatrixXd features;  // N x D, intercept column included
  Eigen::VectorXd labels;    // 0/1
  double prior_sd = 5.0;

  void validate() const;
};

struct PosteriorPair {
  UnnormalizedDensity prior;
  UnnormalizedDensity target;
};

/// prior = N(0, prior_sd^2 I); target = prior x Bernoulli-logit likelihood.
PosteriorPair make_logistic_posterior(const LogisticModel& m);

/// Density on the integer atoms {0, ..., n-1} of R^1 with the given log-masses.
/// Non-integer points have -inf log-density. The sampler draws atoms in
/// proportion to their masses.
UnnormalizedDensity make_categorical(const std::vector<double>& log_masses);

struct GridDensity {
  std::vector<Point> atoms;
  Eigen::VectorXd mass;

  /// Throws DomainError on negative or non-finite mass, size mismatch, or all-zero mass.
  void validate() const;
  std::size_t size() const { return static_cast<std::size_t>(mass.size()); }
};

GridDensity grid_from_density(const UnnormalizedDensity& f, const std::vector<Point>& atoms);

}  // namespace qpaths
