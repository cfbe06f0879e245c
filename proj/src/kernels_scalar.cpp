#include <cmath>

#include "qpaths/kernels.hpp"

namespace qpaths::kernels {

namespace detail {

// Branch threshold on (1-q)(log target - log base) above which expm1 is
// replaced by an explicit log-domain sum.
constexpr double kExpm1Limit = 700.0;

double qpath_log_energy_one(double a, double b, double beta, double k) {
  const double rho = 1.0 / k;
  if (std::isnan(a) || std::isnan(b)) return NAN;
  if (a == -INFINITY || b == -INFINITY) {
    if (k < 0.0) return -INFINITY;  // min-like mean of a zero
    if (a == -INFINITY && b == -INFINITY) return -INFINITY;
    if (a == -INFINITY) return b + rho * std::log(beta);
    return a + rho * std::log1p(-beta);
  }
  const double x = k * (b - a);
  double s;
  if (x <= kExpm1Limit) {
    s = std::log1p(beta * std::expm1(x));
  } else {
    s = std::log(beta) + x + std::log1p((1.0 - beta) / beta * std::exp(-x));
  }
  return a + rho * s;
}

double qpath_mixing_weight_one(double a, double b, double beta, double k) {
  if (a == -INFINITY) return 1.0;
  if (b == -INFINITY) return 0.0;
  const double x = k * (b - a);
  return 1.0 / (1.0 + std::exp(std::log1p(-beta) - std::log(beta) - x));
}

}  // namespace detail

namespace {

void exp_s(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}
void log_s(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::log(x[i]);
}
void expm1_s(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::expm1(x[i]);
}
void log1p_s(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::log1p(x[i]);
}

void lnq_of_exp_s(const double* log_w, double k, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::expm1(k * log_w[i]) / k;
}

void qpath_log_energy_s(const double* a, const double* b, double beta, double k, double* out,
                        std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = detail::qpath_log_energy_one(a[i], b[i], beta, k);
}

double max_s(const double* x, std::size_t n) {
  double m = -INFINITY;
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > m || std::isnan(x[i])) m = x[i];
  return m;
}

void exp_moments_s(const double* x, double shift, std::size_t n, double* s1, double* s2) {
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::exp(x[i] - shift);
    a += e;
    b += e * e;
  }
  *s1 = a;
  *s2 = b;
}

double logistic_loglik_s(const double* t, const double* y, double* residual, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::exp(-std::fabs(t[i]));
    const double softplus = std::fmax(t[i], 0.0) + std::log1p(e);
    const double sigmoid = t[i] >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    total += y[i] * t[i] - softplus;
    residual[i] = y[i] - sigmoid;
  }
  return total;
}

constexpr Table kScalar{
    "scalar",      exp_s, log_s, expm1_s, log1p_s, lnq_of_exp_s, qpath_log_energy_s, max_s,
    exp_moments_s, logistic_loglik_s,
};

}  // namespace

const Table& scalar_table() { return kScalar; }

}  // namespace qpaths::kernels
