#include "popde/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace popde::kernels {

namespace detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot3_scalar(const double* a, const double* b, const double* w, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i] * w[i];
  return s;
}

void vexp_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double v = std::clamp(x[i], -708.396418532264106224, 709.782712893383996732);
    y[i] = std::exp(v);
  }
}

void axpy_scalar(double* dst, double c, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += c * a[i];
}

double min_reduce_scalar(const double* a, std::size_t n) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::min(m, a[i]);
  return m;
}

}  // namespace detail

namespace {

Backend g_backend = [] {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Backend::avx2;
#endif
  return Backend::scalar;
}();

}  // namespace

Backend active_backend() { return g_backend; }

bool backend_supported(Backend b) {
  if (b == Backend::scalar) return true;
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

void force_backend(Backend b) { g_backend = backend_supported(b) ? b : Backend::scalar; }

void reset_backend() {
  g_backend = backend_supported(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

double dot(const double* a, const double* b, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_backend == Backend::avx2) return detail::dot_avx2(a, b, n);
#endif
  return detail::dot_scalar(a, b, n);
}

double dot3(const double* a, const double* b, const double* w, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_backend == Backend::avx2) return detail::dot3_avx2(a, b, w, n);
#endif
  return detail::dot3_scalar(a, b, w, n);
}

void vexp(const double* x, double* y, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_backend == Backend::avx2) return detail::vexp_avx2(x, y, n);
#endif
  detail::vexp_scalar(x, y, n);
}

void axpy(double* dst, double c, const double* a, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_backend == Backend::avx2) return detail::axpy_avx2(dst, c, a, n);
#endif
  detail::axpy_scalar(dst, c, a, n);
}

double min_reduce(const double* a, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_backend == Backend::avx2) return detail::min_reduce_avx2(a, n);
#endif
  return detail::min_reduce_scalar(a, n);
}

}  // namespace popde::kernels
