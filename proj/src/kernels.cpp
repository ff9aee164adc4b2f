#include "sublex/kernels.hpp"

#include <algorithm>

namespace sublex::kernels {

namespace scalar {

double sum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

double max(const double* x, std::size_t n) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

void scale(double* y, const double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i];
}

void axpy(double* y, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void mul(double* z, const double* x, const double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
}

} // namespace scalar

namespace {

struct Dispatch {
    double (*sum)(const double*, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    double (*max)(const double*, std::size_t);
    void (*scale)(double*, const double*, double, std::size_t);
    void (*axpy)(double*, double, const double*, std::size_t);
    void (*mul)(double*, const double*, const double*, std::size_t);
    const char* name;
};

constexpr Dispatch kScalar = {scalar::sum, scalar::dot, scalar::max,
                              scalar::scale, scalar::axpy, scalar::mul,
                              "scalar"};

#ifdef SUBLEX_HAVE_AVX2_BUILD
constexpr Dispatch kAvx2 = {avx2::sum, avx2::dot, avx2::max,
                            avx2::scale, avx2::axpy, avx2::mul,
                            "avx2"};
#endif

const Dispatch& detect() {
#ifdef SUBLEX_HAVE_AVX2_BUILD
    if (__builtin_cpu_supports("avx2")) return kAvx2;
#endif
    return kScalar;
}

const Dispatch* g_active = nullptr;

const Dispatch& active() {
    if (g_active == nullptr) g_active = &detect();
    return *g_active;
}

} // namespace

double sum(const double* x, std::size_t n) { return active().sum(x, n); }
double dot(const double* x, const double* y, std::size_t n) { return active().dot(x, y, n); }
double max(const double* x, std::size_t n) { return active().max(x, n); }
void scale(double* y, const double* x, double a, std::size_t n) { active().scale(y, x, a, n); }
void axpy(double* y, double a, const double* x, std::size_t n) { active().axpy(y, a, x, n); }
void mul(double* z, const double* x, const double* y, std::size_t n) { active().mul(z, x, y, n); }

const char* active_backend() { return active().name; }

void force_scalar(bool on) {
    g_active = on ? &kScalar : &detect();
}

} // namespace sublex::kernels
