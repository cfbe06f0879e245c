#include "qpaths/deformed_math.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "qpaths/error.hpp"

namespace qpaths {

OrderQ::OrderQ(double q) : q_(q), unit_(std::fabs(q - 1.0) < kUnitTolerance) {
  if (!std::isfinite(q)) throw DomainError("order q must be finite");
  if (unit_) q_ = 1.0;
}

OrderQ OrderQ::from_rho(double rho) {
  if (!(rho != 0.0) || std::isnan(rho)) throw DomainError("rho must be nonzero");
  if (std::isinf(rho)) return OrderQ(1.0);
  return OrderQ(1.0 - 1.0 / rho);
}

double OrderQ::rho() const noexcept {
  return unit_ ? std::numeric_limits<double>::infinity() : 1.0 / (1.0 - q_);
}

void WeightedInputs::validate() const {
  if (values.empty() || values.size() != weights.size())
    throw DomainError("power mean needs equal, nonzero numbers of values and weights");
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0)) throw DomainError("power mean values must be nonnegative");
    if (!(weights[i] >= 0.0)) throw DomainError("power mean weights must be nonnegative");
    total += weights[i];
  }
  if (std::fabs(total - 1.0) > 1e-12) throw DomainError("power mean weights must sum to one");
}

double ln_q(double u, OrderQ q) {
  if (!(u > 0.0)) throw DomainError("ln_q requires u > 0, got " + std::to_string(u));
  const double log_u = std::log(u);
  if (q.is_unit()) return log_u;
  const double k = q.one_minus_q();
  return std::expm1(k * log_u) / k;
}

double exp_q(double u, OrderQ q) {
  if (q.is_unit()) return std::exp(u);
  const double k = q.one_minus_q();
  const double t = k * u;
  if (std::isnan(t)) return t;
  if (t <= -1.0) {
    // [x]_+ = 0: zero mass for q < 1, the pole of the power for q > 1.
    return k > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::exp(std::log1p(t) / k);
}

double power_mean(const WeightedInputs& inputs, OrderQ q) {
  inputs.validate();
  const auto& u = inputs.values;
  const auto& w = inputs.weights;
  const double lo = *std::min_element(u.begin(), u.end());
  const double hi = *std::max_element(u.begin(), u.end());

  // Weighted log-sum-exp of log w_i + (1-q) log u_i, skipping zero weights.
  const double k = q.one_minus_q();
  double acc = -INFINITY;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (w[i] == 0.0) continue;
    if (u[i] == 0.0 && k <= 0.0) return 0.0;  // geometric and min-like means vanish
    if (q.is_unit()) continue;
    acc = log_add_exp(acc, std::log(w[i]) + k * std::log(u[i]));
  }

  double mean;
  if (q.is_unit()) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
      if (w[i] > 0.0) s += w[i] * std::log(u[i]);
    mean = std::exp(s);
  } else {
    // Near q = 1 the log-sum-exp is k times a small number; log1p/expm1 keeps its digits.
    double spread = 0.0, s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
      if (w[i] > 0.0) spread = std::max(spread, std::fabs(k * std::log(u[i])));
    if (spread < 0.5) {
      for (std::size_t i = 0; i < u.size(); ++i)
        if (w[i] > 0.0) s += w[i] * std::expm1(k * std::log(u[i]));
      mean = std::exp(std::log1p(s) / k);
    } else {
      mean = std::exp(acc / k);
    }
  }
  return std::clamp(mean, lo, hi);
}

double stable_lnq_of_exp(double log_w, OrderQ q) {
  if (q.is_unit()) return log_w;
  const double k = q.one_minus_q();
  return std::expm1(k * log_w) / k;
}

RhoChoice rho_from_log_weights(std::span<const double> log_ws) {
  if (log_ws.empty()) throw DomainError("rho rule needs at least one log-weight");
  double rho = 0.0;
  for (double lw : log_ws) {
    if (std::isnan(lw)) throw DomainError("rho rule got a NaN log-weight");
    rho = std::max(rho, std::fabs(lw));
  }
  if (rho == 0.0) return {1.0, 0.0, true};
  return {rho, 1.0 - 1.0 / rho, false};
}

double qexp_sum_rhs(std::span<const double> xs, OrderQ q) {
  const double k = q.one_minus_q();
  double prefix = 0.0;
  double product = 1.0;
  for (double x : xs) {
    const double denom = 1.0 + k * prefix;
    if (denom == 0.0) throw SingularityError("sum identity denominator vanished");
    product *= exp_q(x / denom, q);
    prefix += x;
  }
  return product;
}

double qexp_prod_rhs(std::span<const double> xs, OrderQ q) {
  const double k = q.one_minus_q();
  double running = 1.0;
  double arg = 0.0;
  for (double x : xs) {
    arg += x * running;
    running *= 1.0 + k * x;
  }
  return exp_q(arg, q);
}

MultiplicativeForm psi_to_multiplicative(const Eigen::VectorXd& theta, double psi_q, OrderQ q) {
  if (q.is_unit()) return {theta, std::exp(psi_q)};
  const double denom = 1.0 + q.one_minus_q() * (-psi_q);
  if (!(denom > 0.0)) throw DomainError("1 + (1-q)(-psi_q) must be positive");
  return {theta / denom, 1.0 / exp_q(-psi_q, q)};
}

}  // namespace qpaths
