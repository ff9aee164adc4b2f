#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace sublex {

// Digamma via upward recurrence + asymptotic expansion (|error| < 1e-12 for x > 0).
inline double digamma(double x) {
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv
            - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
    return result;
}

inline double log_gamma_pdf(double x, double shape, double scale) {
    return (shape - 1.0) * std::log(x) - x / scale
         - std::lgamma(shape) - shape * std::log(scale);
}

// KL( Beta(a,b) || Beta(a0,b0) )
inline double kl_beta(double a, double b, double a0, double b0) {
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b)
         - std::lgamma(a0 + b0) + std::lgamma(a0) + std::lgamma(b0)
         + (a - a0) * digamma(a)
         + (b - b0) * digamma(b)
         - (a + b - a0 - b0) * digamma(a + b);
}

inline double logsumexp(const double* x, std::size_t n) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - m);
    return m + std::log(s);
}

inline double logsumexp(const std::vector<double>& x) {
    return logsumexp(x.data(), x.size());
}

} // namespace sublex
