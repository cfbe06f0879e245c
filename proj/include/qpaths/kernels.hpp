#pragma once

// Batched inner loops over particles/atoms. Every kernel has a scalar
// reference implementation built on <cmath>; an AVX2/FMA variant is selected
// at runtime when the host supports it. Set QPATHS_FORCE_SCALAR=1 to pin the
// scalar table.

#include <cstddef>
#include <span>

namespace qpaths::kernels {

struct Table {
  const char* name;

  void (*exp)(const double* x, double* out, std::size_t n);
  void (*log)(const double* x, double* out, std::size_t n);
  void (*expm1)(const double* x, double* out, std::size_t n);
  void (*log1p)(const double* x, double* out, std::size_t n);

  /// out_i = expm1(k * log_w_i) / k  (k = 1 - q, nonzero).
  void (*lnq_of_exp)(const double* log_w, double k, double* out, std::size_t n);

  /// Log q-path energy from endpoint log-densities for 0 < beta < 1, k != 0.
  void (*qpath_log_energy)(const double* log_base, const double* log_target, double beta,
                           double k, double* out, std::size_t n);

  /// max_i x_i (-inf for n == 0).
  double (*max)(const double* x, std::size_t n);

  /// s1 = sum exp(x_i - shift), s2 = sum exp(2 (x_i - shift)).
  void (*exp_moments)(const double* x, double shift, std::size_t n, double* s1, double* s2);

  /// Bernoulli-logit log-likelihood sum_i y_i t_i - log(1 + e^{t_i}).
  /// Writes residual_i = y_i - sigmoid(t_i).
  double (*logistic_loglik)(const double* logits, const double* labels, double* residual,
                            std::size_t n);
};

const Table& scalar_table();
/// nullptr when the build or the host lacks AVX2+FMA.
const Table* avx2_table();
/// Table used by the library.
const Table& active();

namespace detail {
/// Single-element q-path energy shared by the scalar table and the path code.
double qpath_log_energy_one(double log_base, double log_target, double beta, double k);
/// Mixing weight lambda in grad E = grad log base + lambda (grad log target - grad log base).
double qpath_mixing_weight_one(double log_base, double log_target, double beta, double k);
}  // namespace detail

// Convenience wrappers on the active table.

double log_sum_exp(std::span<const double> x);
/// log((1/n) sum exp(x_i)); -inf entries count towards n.
double log_mean_exp(std::span<const double> x);
/// (sum w)^2 / sum w^2 from log-weights. Requires one finite entry.
double ess_of_log_weights(std::span<const double> log_weights);

}  // namespace qpaths::kernels
