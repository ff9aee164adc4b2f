#pragma once

#include <cstddef>

// Dense vector kernels used by the predictive-table builders and the
// occurrence DP. Scalar reference implementations always exist; on x86-64
// an AVX2 variant is selected once at startup. Both variants are exposed
// for equivalence testing.

namespace sublex::kernels {

namespace scalar {
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double max(const double* x, std::size_t n);
void scale(double* y, const double* x, double a, std::size_t n);   // y = a * x
void axpy(double* y, double a, const double* x, std::size_t n);    // y += a * x
void mul(double* z, const double* x, const double* y, std::size_t n);
} // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define SUBLEX_HAVE_AVX2_BUILD 1
namespace avx2 {
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double max(const double* x, std::size_t n);
void scale(double* y, const double* x, double a, std::size_t n);
void axpy(double* y, double a, const double* x, std::size_t n);
void mul(double* z, const double* x, const double* y, std::size_t n);
} // namespace avx2
#endif

// Runtime-dispatched entry points.
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double max(const double* x, std::size_t n);
void scale(double* y, const double* x, double a, std::size_t n);
void axpy(double* y, double a, const double* x, std::size_t n);
void mul(double* z, const double* x, const double* y, std::size_t n);

// "avx2" or "scalar".
const char* active_backend();

// Test hook: force the scalar path (true) or restore auto-detection (false).
void force_scalar(bool on);

} // namespace sublex::kernels
