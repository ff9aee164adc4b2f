#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace sublex {

// Deterministic RNG. mt19937_64 output is pinned by the standard; the
// real-valued draws below avoid std:: distributions, whose results are
// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Uniform in (0, 1].
    double next_double_open() {
        return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
    }

    double next_exp() { return -std::log(next_double_open()); }

    // Uniform integer in [0, n), unbiased.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do { v = eng_(); } while (v >= limit);
        return v % n;
    }

    double next_normal() {
        // Marsaglia polar method; cache the spare value.
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    // Marsaglia-Tsang gamma sampler (unit scale).
    double next_gamma(double shape) {
        if (shape < 1.0) {
            const double u = next_double_open();
            return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = next_normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = next_double_open();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Dirichlet draw with the given parameter vector.
    std::vector<double> next_dirichlet(const std::vector<double>& alpha) {
        std::vector<double> g(alpha.size());
        double total = 0.0;
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            g[i] = next_gamma(alpha[i]);
            total += g[i];
        }
        for (double& x : g) x /= total;
        return g;
    }

    // Symmetric Dirichlet(1): normalized exponentials.
    std::vector<double> next_dirichlet_uniform(std::size_t k) {
        std::vector<double> g(k);
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            g[i] = next_exp();
            total += g[i];
        }
        for (double& x : g) x /= total;
        return g;
    }

    // Index sampled from an (unnormalized) nonnegative weight vector.
    std::size_t next_categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = next_double() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) return i;
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace sublex
