// AVX2+FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after a runtime CPU feature check (see kernels.cpp).

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>

#include "popde/kernels.hpp"

namespace popde::kernels::detail {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// exp via Cody-Waite reduction and the Cephes rational approximation:
// exp(x) = 2^n * (1 + 2*p/(q - p)), p = r*P(r^2), q = Q(r^2), r = x - n*ln2.
inline __m256d exp4(__m256d x) {
  const __m256d lo_clamp = _mm256_set1_pd(-708.396418532264106224);
  const __m256d hi_clamp = _mm256_set1_pd(709.782712893383996732);
  x = _mm256_max_pd(lo_clamp, _mm256_min_pd(hi_clamp, x));

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  __m256d nf = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                               _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);

  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
  __m256d r = _mm256_fnmadd_pd(nf, c1, x);
  r = _mm256_fnmadd_pd(nf, c2, r);
  __m256d r2 = _mm256_mul_pd(r, r);

  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
  __m256d px = _mm256_fmadd_pd(p0, r2, p1);
  px = _mm256_fmadd_pd(px, r2, p2);
  px = _mm256_mul_pd(px, r);

  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);
  __m256d qx = _mm256_fmadd_pd(q0, r2, q1);
  qx = _mm256_fmadd_pd(qx, r2, q2);
  qx = _mm256_fmadd_pd(qx, r2, q3);

  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  __m256d y = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  // y * 2^n through exponent-field arithmetic; |n| <= 1075 after clamping.
  // Scaling is applied as 2^(n/2) * 2^(n - n/2) so each factor stays normal.
  __m128i ni = _mm256_cvtpd_epi32(nf);
  __m128i ni_a = _mm_srai_epi32(ni, 1);
  __m128i ni_b = _mm_sub_epi32(ni, ni_a);
  __m256i n_a = _mm256_cvtepi32_epi64(ni_a);
  __m256i n_b = _mm256_cvtepi32_epi64(ni_b);
  const __m256i bias = _mm256_set1_epi64x(1023);
  __m256d sa = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(n_a, bias), 52));
  __m256d sb = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(n_b, bias), 52));
  return _mm256_mul_pd(_mm256_mul_pd(y, sa), sb);
}

}  // namespace

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot3_avx2(const double* a, const double* b, const double* w, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(ab, _mm256_loadu_pd(w + i), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i] * w[i];
  return s;
}

void vexp_avx2(const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, exp4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) {
    double v = x[i];
    v = v < -708.396418532264106224 ? -708.396418532264106224 : v;
    v = v > 709.782712893383996732 ? 709.782712893383996732 : v;
    y[i] = std::exp(v);
  }
}

void axpy_avx2(double* dst, double c, const double* a, std::size_t n) {
  __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_loadu_pd(dst + i);
    d = _mm256_fmadd_pd(vc, _mm256_loadu_pd(a + i), d);
    _mm256_storeu_pd(dst + i, d);
  }
  for (; i < n; ++i) dst[i] += c * a[i];
}

double min_reduce_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_min_pd(acc, _mm256_loadu_pd(a + i));
  __m128d lo = _mm_min_pd(_mm256_castpd256_pd128(acc), _mm256_extractf128_pd(acc, 1));
  lo = _mm_min_sd(lo, _mm_unpackhi_pd(lo, lo));
  double m = _mm_cvtsd_f64(lo);
  for (; i < n; ++i) m = a[i] < m ? a[i] : m;
  return m;
}

}  // namespace popde::kernels::detail

#endif  // x86_64
