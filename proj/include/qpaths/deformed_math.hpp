#pragma once

// Scalar q-deformed logarithm/exponential, homogeneous power means and the
// q-exponential sum/product identities.

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace qpaths {

/// Order q of a deformed log/exp, power mean or path.
///
/// q = 1 is an exact branch (|q - 1| < kUnitTolerance) and is never evaluated
/// through the (u^{1-q} - 1)/(1-q) form.
class OrderQ {
 public:
  static constexpr double kUnitTolerance = 1e-12;

  explicit OrderQ(double q);
  /// q = 1 - 1/rho.
  static OrderQ from_rho(double rho);

  double value() const noexcept { return q_; }
  bool is_unit() const noexcept { return unit_; }
  /// 1 - q, exactly 0 on the unit branch.
  double one_minus_q() const noexcept { return unit_ ? 0.0 : 1.0 - q_; }
  /// 1/(1 - q); +inf on the unit branch.
  double rho() const noexcept;

 private:
  double q_;
  bool unit_;
};

/// Values u_i >= 0 with weights w_i >= 0 summing to one.
struct WeightedInputs {
  std::vector<double> values;
  std::vector<double> weights;

  /// Throws DomainError when lengths differ, are empty, any entry is
  /// negative, or |sum(w) - 1| > 1e-12.
  void validate() const;
};

double ln_q(double u, OrderQ q);
double exp_q(double u, OrderQ q);

/// (sum_i w_i u_i^{1-q})^{1/(1-q)}, geometric mean at q = 1.
/// A zero input with positive weight yields 0 for q >= 1.
double power_mean(const WeightedInputs& inputs, OrderQ q);

/// ln_q(exp(log_w)) = rho * expm1(log_w / rho), without forming exp(log_w).
double stable_lnq_of_exp(double log_w, OrderQ q);

struct RhoChoice {
  double rho;
  double q;
  bool degenerate;  // every log-weight was zero; rho fell back to 1
};

/// rho = max_i |log w_i| and the matching q = 1 - 1/rho.
RhoChoice rho_from_log_weights(std::span<const double> log_ws);

/// prod_n exp_q(x_n / (1 + (1-q) sum_{i<n} x_i)); equals exp_q(sum x).
double qexp_sum_rhs(std::span<const double> xs, OrderQ q);

/// exp_q(sum_n x_n prod_{i<n} (1 + (1-q) x_i)); equals prod exp_q(x_n).
double qexp_prod_rhs(std::span<const double> xs, OrderQ q);

struct MultiplicativeForm {
  Eigen::VectorXd beta;
  double Z;
};

/// Converts g exp_q(theta.phi - psi_q) into Z^{-1} g exp_q(beta.phi).
MultiplicativeForm psi_to_multiplicative(const Eigen::VectorXd& theta, double psi_q, OrderQ q);

/// log(exp(a) + exp(b)) with -inf handling.
inline double log_add_exp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double m = a > b ? a : b;
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

}  // namespace qpaths
