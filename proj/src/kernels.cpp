#include "qpaths/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

namespace qpaths::kernels {

#ifdef QPATHS_HAVE_AVX2
const Table* avx2_table_impl();
#endif

const Table* avx2_table() {
#ifdef QPATHS_HAVE_AVX2
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

const Table& active() {
  static const Table* chosen = [] {
    const char* force = std::getenv("QPATHS_FORCE_SCALAR");
    if (force != nullptr && std::strcmp(force, "1") == 0) return &scalar_table();
    const Table* t = avx2_table();
    return t != nullptr ? t : &scalar_table();
  }();
  return *chosen;
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -INFINITY;
  const Table& t = active();
  const double m = t.max(x.data(), x.size());
  if (std::isnan(m)) return NAN;
  if (m == -INFINITY || m == INFINITY) return m;
  double s1 = 0.0, s2 = 0.0;
  t.exp_moments(x.data(), m, x.size(), &s1, &s2);
  return m + std::log(s1);
}

double log_mean_exp(std::span<const double> x) {
  if (x.empty()) return -INFINITY;
  return log_sum_exp(x) - std::log(static_cast<double>(x.size()));
}

double ess_of_log_weights(std::span<const double> log_weights) {
  const Table& t = active();
  const double m = t.max(log_weights.data(), log_weights.size());
  if (!std::isfinite(m)) return NAN;
  double s1 = 0.0, s2 = 0.0;
  t.exp_moments(log_weights.data(), m, log_weights.size(), &s1, &s2);
  return s1 * s1 / s2;
}

}  // namespace qpaths::kernels
