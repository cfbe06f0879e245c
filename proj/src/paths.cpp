#include "qpaths/paths.hpp"

#include <cmath>

#include "qpaths/error.hpp"
#include "qpaths/kernels.hpp"

namespace qpaths {

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("beta must lie in [0, 1]");
}

BoundEnergy AnnealingPath::at(double beta) const {
  check_beta(beta);
  return [this, beta](const Point& z, Eigen::VectorXd& g) { return log_energy_and_gradient(z, beta, g); };
}

AnnealingPath::Cache AnnealingPath::prepare(std::span<const Point> points) const {
  Cache c;
  c.points = points;
  return c;
}

void AnnealingPath::energies(const Cache& cache, double beta, std::span<double> out) const {
  for (std::size_t i = 0; i < cache.points.size(); ++i) out[i] = log_energy(cache.points[i], beta);
}

double qpath_log_energy(double a, double b, double beta, OrderQ q) {
  check_beta(beta);
  if (beta == 0.0) return a;
  if (beta == 1.0) return b;
  if (q.is_unit()) {
    if (a == b) return a;
    if (a == -INFINITY || b == -INFINITY) return -INFINITY;
    return a + beta * (b - a);
  }
  return kernels::detail::qpath_log_energy_one(a, b, beta, q.one_minus_q());
}

QPath::QPath(UnnormalizedDensity base, UnnormalizedDensity target, OrderQ q)
    : base_(std::move(base)), target_(std::move(target)), q_(q) {
  if (base_.dim() != target_.dim()) throw DomainError("path endpoints must share a dimension");
}

double QPath::log_energy(const Point& z, double beta) const {
  check_beta(beta);
  if (beta == 0.0) return base_.log_density(z);
  if (beta == 1.0) return target_.log_density(z);
  return qpath_log_energy(base_.log_density(z), target_.log_density(z), beta, q_);
}

double QPath::log_energy_and_gradient(const Point& z, double beta, Eigen::VectorXd& grad) const {
  check_beta(beta);
  if (beta == 0.0) return base_.value_and_gradient(z, grad);
  if (beta == 1.0) return target_.value_and_gradient(z, grad);
  Eigen::VectorXd ga, gb;
  const double a = base_.value_and_gradient(z, ga);
  const double b = target_.value_and_gradient(z, gb);
  const double e = qpath_log_energy(a, b, beta, q_);
  if (e == -INFINITY) {
    grad = Eigen::VectorXd::Zero(dim());
    return e;
  }
  double lambda = beta;
  if (!q_.is_unit() && a != b) lambda = kernels::detail::qpath_mixing_weight_one(a, b, beta, q_.one_minus_q());
  if (lambda == 0.0)
    grad = ga;
  else if (lambda == 1.0)
    grad = gb;
  else
    grad = ga + lambda * (gb - ga);
  return e;
}

AnnealingPath::Cache QPath::prepare(std::span<const Point> points) const {
  Cache c;
  c.points = points;
  c.base_log.resize(points.size());
  c.target_log.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    c.base_log[i] = base_.log_density(points[i]);
    c.target_log[i] = target_.log_density(points[i]);
  }
  return c;
}

void QPath::energies(const Cache& cache, double beta, std::span<double> out) const {
  check_beta(beta);
  const std::size_t n = cache.base_log.size();
  if (beta == 0.0 || beta == 1.0 || q_.is_unit()) {
    for (std::size_t i = 0; i < n; ++i)
      out[i] = qpath_log_energy(cache.base_log[i], cache.target_log[i], beta, q_);
    return;
  }
  kernels::active().qpath_log_energy(cache.base_log.data(), cache.target_log.data(), beta,
                                     q_.one_minus_q(), out.data(), n);
}

double qpath_log_density(const QPath& p, const Point& z, double beta) { return p.log_energy(z, beta); }

Eigen::VectorXd qpath_gradient(const QPath& p, const Point& z, double beta) {
  Eigen::VectorXd g;
  if (p.log_energy_and_gradient(z, beta, g) == -INFINITY)
    throw DomainError("q-path gradient requested at a point of zero mass");
  return g;
}

MomentParams moment_path_params(const GaussianMomentPath& p, double beta, EscortCovariance convention) {
  check_beta(beta);
  if (p.mu0.size() != p.mu1.size() || p.Sigma0.rows() != p.mu0.size() || p.Sigma1.rows() != p.mu1.size())
    throw DomainError("moment path endpoint dimensions differ");
  if (!(p.nu > 0.0)) throw DomainError("degrees of freedom must be positive");
  const double factor =
      (std::isinf(p.nu) || convention == EscortCovariance::kExact) ? 1.0 : (p.nu + 2.0) / p.nu;
  if (beta == 0.0 || (p.mu0 == p.mu1 && p.Sigma0 == p.Sigma1)) return {p.mu0, p.Sigma0};
  if (beta == 1.0) return {p.mu1, p.Sigma1};
  const Eigen::VectorXd delta = p.mu1 - p.mu0;
  MomentParams out;
  out.mu = (1.0 - beta) * p.mu0 + beta * p.mu1;
  out.Sigma = (1.0 - beta) * p.Sigma0 + beta * p.Sigma1 + factor * beta * (1.0 - beta) * delta * delta.transpose();
  out.Sigma = 0.5 * (out.Sigma + out.Sigma.transpose()).eval();
  return out;
}

namespace {
UnnormalizedDensity endpoint(const Eigen::VectorXd& mu, const Eigen::MatrixXd& S, double nu) {
  return make_student_t(StudentTParams{mu, S, nu});
}
}  // namespace

MomentAveragedPath::MomentAveragedPath(GaussianMomentPath p, double target_log_scale,
                                       EscortCovariance convention)
    : p_(std::move(p)),
      log_scale_(target_log_scale),
      convention_(convention),
      base_(endpoint(p_.mu0, p_.Sigma0, p_.nu)),
      target_(target_log_scale == 0.0 ? endpoint(p_.mu1, p_.Sigma1, p_.nu)
                                      : scaled(endpoint(p_.mu1, p_.Sigma1, p_.nu), target_log_scale)) {
  if (p_.mu0.size() != p_.mu1.size()) throw DomainError("moment path endpoint dimensions differ");
}

UnnormalizedDensity MomentAveragedPath::intermediate(double beta) const {
  if (beta == 0.0) return base_;
  if (beta == 1.0) return target_;
  const MomentParams m = moment_path_params(p_, beta, convention_);
  UnnormalizedDensity d = endpoint(m.mu, m.Sigma, p_.nu);
  return log_scale_ == 0.0 ? d : scaled(d, beta * log_scale_);
}

double MomentAveragedPath::log_energy(const Point& z, double beta) const {
  check_beta(beta);
  return intermediate(beta).log_density(z);
}

double MomentAveragedPath::log_energy_and_gradient(const Point& z, double beta, Eigen::VectorXd& grad) const {
  check_beta(beta);
  return intermediate(beta).value_and_gradient(z, grad);
}

BoundEnergy MomentAveragedPath::at(double beta) const {
  check_beta(beta);
  UnnormalizedDensity d = intermediate(beta);
  return [d](const Point& z, Eigen::VectorXd& g) { return d.value_and_gradient(z, g); };
}

void MomentAveragedPath::energies(const Cache& cache, double beta, std::span<double> out) const {
  check_beta(beta);
  const UnnormalizedDensity d = intermediate(beta);
  for (std::size_t i = 0; i < cache.points.size(); ++i) out[i] = d.log_density(cache.points[i]);
}

Eigen::VectorXd same_family_qpath_params(const Eigen::VectorXd& theta0, const Eigen::VectorXd& theta1,
                                         double beta, OrderQ) {
  check_beta(beta);
  if (theta0.size() != theta1.size()) throw DomainError("natural parameter dimensions differ");
  if (beta == 0.0) return theta0;
  if (beta == 1.0) return theta1;
  return (1.0 - beta) * theta0 + beta * theta1;
}

namespace {
double log_exp_q(double u, OrderQ q) {
  if (q.is_unit()) return u;
  const double k = q.one_minus_q();
  const double t = k * u;
  if (t <= -1.0) return k > 0.0 ? -INFINITY : INFINITY;
  return std::log1p(t) / k;
}
}  // namespace

UnnormalizedDensity make_qexp_family_density(const QExpFamilyParams& params) {
  if (!params.suff_stats) throw DomainError("q-exponential family needs sufficient statistics");
  const QExpFamilyParams p = params;
  UnnormalizedDensity::Spec s;
  s.name = "qexp_family";
  s.dim = p.base_measure.dim();
  s.log_density = [p](const Point& z) {
    const double lg = p.base_measure.log_density(z);
    if (lg == -INFINITY) return lg;
    return lg + log_exp_q(p.theta.dot(p.suff_stats(z)), p.q);
  };
  s.value_and_gradient = [p](const Point& z, Eigen::VectorXd& g) {
    if (!p.suff_stats_jacobian) throw DomainError("q-exponential family gradient needs a Jacobian");
    const double lg = p.base_measure.value_and_gradient(z, g);
    const double u = p.theta.dot(p.suff_stats(z));
    const double slope = p.q.is_unit() ? 1.0 : 1.0 / (1.0 + p.q.one_minus_q() * u);
    g += slope * (p.suff_stats_jacobian(z).transpose() * p.theta);
    return lg + log_exp_q(u, p.q);
  };
  return UnnormalizedDensity(std::move(s));
}

}  // namespace qpaths
