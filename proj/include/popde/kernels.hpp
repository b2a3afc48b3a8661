#pragma once

#include <cstddef>

// Data-parallel primitives used by the quadrature, moment-accumulation and
// grid-evaluation inner loops. Every operation has a scalar reference
// implementation and an AVX2 variant; the active variant is chosen at runtime
// from CPU features and can be forced (e.g. by the equivalence tests).
namespace popde::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
bool backend_supported(Backend b);
// Forces a backend; silently falls back to scalar when unsupported.
void force_backend(Backend b);
void reset_backend();

// sum_i a[i]*b[i]
double dot(const double* a, const double* b, std::size_t n);

// sum_i a[i]*b[i]*w[i]
double dot3(const double* a, const double* b, const double* w, std::size_t n);

// y[i] = exp(x[i]); arguments are clamped to [-708.39, 709.78], full
// accuracy (<= ~2 ulp) for |x| <= 700
void vexp(const double* x, double* y, std::size_t n);

// dst[i] += c*a[i]
void axpy(double* dst, double c, const double* a, std::size_t n);

double min_reduce(const double* a, std::size_t n);

namespace detail {
double dot_scalar(const double* a, const double* b, std::size_t n);
double dot3_scalar(const double* a, const double* b, const double* w, std::size_t n);
void vexp_scalar(const double* x, double* y, std::size_t n);
void axpy_scalar(double* dst, double c, const double* a, std::size_t n);
double min_reduce_scalar(const double* a, std::size_t n);

double dot_avx2(const double* a, const double* b, std::size_t n);
double dot3_avx2(const double* a, const double* b, const double* w, std::size_t n);
void vexp_avx2(const double* x, double* y, std::size_t n);
void axpy_avx2(double* dst, double c, const double* a, std::size_t n);
double min_reduce_avx2(const double* a, std::size_t n);
}  // namespace detail

}  // namespace popde::kernels
