// AVX2/FMA variants of the batched kernels. This translation unit is the only
// one compiled with -mavx2 -mfma; callers reach it through kernels::active()
// after a runtime CPU check.

#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "qpaths/kernels.hpp"

namespace qpaths::kernels {

namespace {

using v4d = __m256d;

inline v4d set1(double x) { return _mm256_set1_pd(x); }

inline v4d pow2_from_int_valued(v4d k) {
  // k holds integers in [-538, 512]; builds 2^k from the exponent bits.
  const __m256i k64 = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(k));
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(k64, _mm256_set1_epi64x(1023)), 52);
  return _mm256_castsi256_pd(bits);
}

inline v4d exp_v(v4d x) {
  const v4d hi_limit = set1(709.782712893384);
  const v4d lo_limit = set1(-745.1332191019412);
  const v4d xc = _mm256_min_pd(_mm256_max_pd(x, set1(-746.0)), set1(710.0));

  const v4d n = _mm256_round_pd(_mm256_mul_pd(xc, set1(1.4426950408889634)),
                                _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  v4d r = _mm256_fnmadd_pd(n, set1(6.93147180369123816490e-01), xc);
  r = _mm256_fnmadd_pd(n, set1(1.90821492927058770002e-10), r);

  // Taylor series of exp on |r| <= ln2/2, degree 13.
  v4d p = set1(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, set1(0.5));
  p = _mm256_fmadd_pd(p, r, set1(1.0));
  p = _mm256_fmadd_pd(p, r, set1(1.0));

  const v4d n1 = _mm256_floor_pd(_mm256_mul_pd(n, set1(0.5)));
  const v4d n2 = _mm256_sub_pd(n, n1);
  v4d result = _mm256_mul_pd(_mm256_mul_pd(p, pow2_from_int_valued(n1)), pow2_from_int_valued(n2));

  result = _mm256_blendv_pd(result, set1(INFINITY), _mm256_cmp_pd(x, hi_limit, _CMP_GT_OQ));
  result = _mm256_blendv_pd(result, _mm256_setzero_pd(), _mm256_cmp_pd(x, lo_limit, _CMP_LT_OQ));
  result = _mm256_blendv_pd(result, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
  return result;
}

inline v4d log_v(v4d x) {
  const v4d tiny = set1(2.2250738585072014e-308);
  const v4d is_sub = _mm256_and_pd(_mm256_cmp_pd(x, tiny, _CMP_LT_OQ),
                                   _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_GT_OQ));
  const v4d xs = _mm256_blendv_pd(x, _mm256_mul_pd(x, set1(4503599627370496.0)), is_sub);
  const v4d e_adj = _mm256_and_pd(is_sub, set1(-52.0));

  const __m256i bits = _mm256_castpd_si256(xs);
  const __m256i e_raw = _mm256_and_si256(_mm256_srli_epi64(bits, 52), _mm256_set1_epi64x(0x7ff));
  // e_raw is in [0, 2047]; convert through the 2^52 magic constant.
  const v4d magic = set1(4503599627370496.0);
  v4d e = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(e_raw, _mm256_castpd_si256(magic))), magic);
  e = _mm256_add_pd(_mm256_sub_pd(e, set1(1023.0)), e_adj);

  const __m256i m_bits =
      _mm256_or_si256(_mm256_and_si256(bits, _mm256_set1_epi64x(0x000fffffffffffffLL)),
                      _mm256_set1_epi64x(0x3ff0000000000000LL));
  v4d m = _mm256_castsi256_pd(m_bits);
  const v4d big = _mm256_cmp_pd(m, set1(1.4142135623730951), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, set1(0.5)), big);
  e = _mm256_add_pd(e, _mm256_and_pd(big, set1(1.0)));

  const v4d f = _mm256_sub_pd(m, set1(1.0));
  const v4d s = _mm256_div_pd(f, _mm256_add_pd(f, set1(2.0)));
  const v4d z = _mm256_mul_pd(s, s);
  // 2 atanh(s) = 2s sum_k s^{2k} / (2k+1)
  v4d p = set1(1.0 / 23.0);
  p = _mm256_fmadd_pd(p, z, set1(1.0 / 21.0));
  p = _mm256_fmadd_pd(p, z, set1(1.0 / 19.0));
  p = _mm256_fmadd_pd(p, z, set1(1.0 / 17.0));
  p = _mm256_fmadd_pd(p, z, set1(1.0 / 15.0));
  p = _mm256_fmadd_pd(p, z, set1(1.0 / 13.0));
  p = _mm256_fmadd_pd(p, z, set1(1.0 / 11.0));
  p = _mm256_fmadd_pd(p, z, set1(1.0 / 9.0));
  p = _mm256_fmadd_pd(p, z, set1(1.0 / 7.0));
  p = _mm256_fmadd_pd(p, z, set1(1.0 / 5.0));
  p = _mm256_fmadd_pd(p, z, set1(1.0 / 3.0));
  const v4d two_s = _mm256_add_pd(s, s);
  const v4d log_m = _mm256_fmadd_pd(_mm256_mul_pd(two_s, z), p, two_s);

  v4d result = _mm256_fmadd_pd(e, set1(1.90821492927058770002e-10), log_m);
  result = _mm256_fmadd_pd(e, set1(6.93147180369123816490e-01), result);

  const v4d zero = _mm256_setzero_pd();
  result = _mm256_blendv_pd(result, set1(-INFINITY), _mm256_cmp_pd(x, zero, _CMP_EQ_OQ));
  result = _mm256_blendv_pd(result, set1(INFINITY), _mm256_cmp_pd(x, set1(INFINITY), _CMP_EQ_OQ));
  result = _mm256_blendv_pd(result, set1(NAN), _mm256_cmp_pd(x, zero, _CMP_LT_OQ));
  result = _mm256_blendv_pd(result, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
  return result;
}

inline v4d expm1_v(v4d x) {
  const v4d abs_x = _mm256_andnot_pd(set1(-0.0), x);
  const v4d small = _mm256_cmp_pd(abs_x, set1(0.5), _CMP_LT_OQ);
  // x * sum_{k=0}^{15} x^k / (k+1)!
  v4d q = set1(1.0 / 20922789888000.0);
  q = _mm256_fmadd_pd(q, x, set1(1.0 / 1307674368000.0));
  q = _mm256_fmadd_pd(q, x, set1(1.0 / 87178291200.0));
  q = _mm256_fmadd_pd(q, x, set1(1.0 / 6227020800.0));
  q = _mm256_fmadd_pd(q, x, set1(1.0 / 479001600.0));
  q = _mm256_fmadd_pd(q, x, set1(1.0 / 39916800.0));
  q = _mm256_fmadd_pd(q, x, set1(1.0 / 3628800.0));
  q = _mm256_fmadd_pd(q, x, set1(1.0 / 362880.0));
  q = _mm256_fmadd_pd(q, x, set1(1.0 / 40320.0));
  q = _mm256_fmadd_pd(q, x, set1(1.0 / 5040.0));
  q = _mm256_fmadd_pd(q, x, set1(1.0 / 720.0));
  q = _mm256_fmadd_pd(q, x, set1(1.0 / 120.0));
  q = _mm256_fmadd_pd(q, x, set1(1.0 / 24.0));
  q = _mm256_fmadd_pd(q, x, set1(1.0 / 6.0));
  q = _mm256_fmadd_pd(q, x, set1(0.5));
  const v4d poly = _mm256_fmadd_pd(_mm256_mul_pd(q, x), x, x);
  const v4d wide = _mm256_sub_pd(exp_v(x), set1(1.0));
  return _mm256_blendv_pd(wide, poly, small);
}

inline v4d log1p_v(v4d y) {
  const v4d one = set1(1.0);
  const v4d u = _mm256_add_pd(one, y);
  const v4d lu = log_v(u);
  const v4d corr = _mm256_div_pd(_mm256_sub_pd(_mm256_sub_pd(u, one), y), u);
  v4d result = _mm256_sub_pd(lu, corr);
  const v4d special = _mm256_or_pd(_mm256_cmp_pd(u, _mm256_setzero_pd(), _CMP_EQ_OQ),
                                   _mm256_cmp_pd(u, set1(INFINITY), _CMP_EQ_OQ));
  result = _mm256_blendv_pd(result, lu, special);
  return result;
}

inline bool all_finite(v4d a, v4d b) {
  // x - x is 0 for finite x and NaN otherwise.
  const v4d da = _mm256_sub_pd(a, a);
  const v4d db = _mm256_sub_pd(b, b);
  const v4d ok = _mm256_and_pd(_mm256_cmp_pd(da, _mm256_setzero_pd(), _CMP_EQ_OQ),
                               _mm256_cmp_pd(db, _mm256_setzero_pd(), _CMP_EQ_OQ));
  return _mm256_movemask_pd(ok) == 0xF;
}

inline double hsum(v4d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

template <v4d (*F)(v4d), double (*G)(double)>
void map_v(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, F(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = G(x[i]);
}

double std_exp(double x) { return std::exp(x); }
double std_log(double x) { return std::log(x); }
double std_expm1(double x) { return std::expm1(x); }
double std_log1p(double x) { return std::log1p(x); }

void lnq_of_exp_v(const double* log_w, double k, double* out, std::size_t n) {
  const v4d kv = set1(k);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const v4d e = expm1_v(_mm256_mul_pd(kv, _mm256_loadu_pd(log_w + i)));
    _mm256_storeu_pd(out + i, _mm256_div_pd(e, kv));
  }
  for (; i < n; ++i) out[i] = std::expm1(k * log_w[i]) / k;
}

void qpath_log_energy_v(const double* a, const double* b, double beta, double k, double* out,
                        std::size_t n) {
  const v4d kv = set1(k);
  const v4d rho = set1(1.0 / k);
  const v4d beta_v = set1(beta);
  const v4d log_beta = set1(std::log(beta));
  const v4d odds = set1((1.0 - beta) / beta);
  const v4d limit = set1(700.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const v4d av = _mm256_loadu_pd(a + i);
    const v4d bv = _mm256_loadu_pd(b + i);
    if (!all_finite(av, bv)) {
      for (std::size_t j = i; j < i + 4; ++j)
        out[j] = detail::qpath_log_energy_one(a[j], b[j], beta, k);
      continue;
    }
    const v4d x = _mm256_mul_pd(kv, _mm256_sub_pd(bv, av));
    const v4d narrow = _mm256_cmp_pd(x, limit, _CMP_LE_OQ);
    const v4d s_narrow = log1p_v(_mm256_mul_pd(beta_v, expm1_v(_mm256_min_pd(x, limit))));
    v4d s = s_narrow;
    if (_mm256_movemask_pd(narrow) != 0xF) {
      const v4d tail = log1p_v(_mm256_mul_pd(odds, exp_v(_mm256_sub_pd(_mm256_setzero_pd(), x))));
      const v4d s_wide = _mm256_add_pd(_mm256_add_pd(log_beta, x), tail);
      s = _mm256_blendv_pd(s_wide, s_narrow, narrow);
    }
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(rho, s, av));
  }
  for (; i < n; ++i) out[i] = detail::qpath_log_energy_one(a[i], b[i], beta, k);
}

double max_v(const double* x, std::size_t n) {
  v4d m = set1(-INFINITY);
  v4d nan_seen = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const v4d v = _mm256_loadu_pd(x + i);
    nan_seen = _mm256_or_pd(nan_seen, _mm256_cmp_pd(v, v, _CMP_UNORD_Q));
    m = _mm256_max_pd(m, v);
  }
  if (_mm256_movemask_pd(nan_seen) != 0) return NAN;
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, m);
  double best = lanes[0];
  for (int j = 1; j < 4; ++j) best = lanes[j] > best ? lanes[j] : best;
  for (; i < n; ++i) {
    if (std::isnan(x[i])) return NAN;
    if (x[i] > best) best = x[i];
  }
  return best;
}

void exp_moments_v(const double* x, double shift, std::size_t n, double* s1, double* s2) {
  const v4d sh = set1(shift);
  v4d acc1 = _mm256_setzero_pd();
  v4d acc2 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const v4d e = exp_v(_mm256_sub_pd(_mm256_loadu_pd(x + i), sh));
    acc1 = _mm256_add_pd(acc1, e);
    acc2 = _mm256_fmadd_pd(e, e, acc2);
  }
  double a = hsum(acc1), b = hsum(acc2);
  for (; i < n; ++i) {
    const double e = std::exp(x[i] - shift);
    a += e;
    b += e * e;
  }
  *s1 = a;
  *s2 = b;
}

double logistic_loglik_v(const double* t, const double* y, double* residual, std::size_t n) {
  const v4d one = set1(1.0);
  const v4d zero = _mm256_setzero_pd();
  v4d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const v4d tv = _mm256_loadu_pd(t + i);
    const v4d yv = _mm256_loadu_pd(y + i);
    const v4d e = exp_v(_mm256_or_pd(tv, set1(-0.0)));  // exp(-|t|)
    const v4d softplus = _mm256_add_pd(_mm256_max_pd(tv, zero), log1p_v(e));
    const v4d denom = _mm256_add_pd(one, e);
    const v4d sig_pos = _mm256_div_pd(one, denom);
    const v4d sig_neg = _mm256_div_pd(e, denom);
    const v4d sig = _mm256_blendv_pd(sig_neg, sig_pos, _mm256_cmp_pd(tv, zero, _CMP_GE_OQ));
    acc = _mm256_add_pd(acc, _mm256_fmsub_pd(yv, tv, softplus));
    _mm256_storeu_pd(residual + i, _mm256_sub_pd(yv, sig));
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    const double e = std::exp(-std::fabs(t[i]));
    const double softplus = std::fmax(t[i], 0.0) + std::log1p(e);
    const double sigmoid = t[i] >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    total += y[i] * t[i] - softplus;
    residual[i] = y[i] - sigmoid;
  }
  return total;
}

constexpr Table kAvx2{
    "avx2",
    map_v<exp_v, std_exp>,
    map_v<log_v, std_log>,
    map_v<expm1_v, std_expm1>,
    map_v<log1p_v, std_log1p>,
    lnq_of_exp_v,
    qpath_log_energy_v,
    max_v,
    exp_moments_v,
    logistic_loglik_v,
};

}  // namespace

const Table* avx2_table_impl() { return &kAvx2; }

}  // namespace qpaths::kernels
