#pragma once

#include <cmath>
#include <cstdint>

#include "saflab/errors.hpp"
#include "saflab/tensor.hpp"

namespace saflab {

// SplitMix64 (Steele, Lea & Flood, "Fast splittable pseudorandom number
// generators", OOPSLA 2014; constants from Vigna's public-domain reference).
// The raw 64-bit stream is pure integer arithmetic, so identical seeds yield
// bitwise-identical streams on every platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Child stream keyed by `key`. Defined as a pure function of the
    // construction seed and the key, so child streams are identical no matter
    // how many draws the parent has made or in which order children are made:
    //   child_seed = mix(seed XOR mix(key + GOLDEN))
    // where mix is the SplitMix64 finalizer and GOLDEN = 0x9E3779B97F4A7C15.
    Rng split(uint64_t key) const {
        return Rng(mix(seed_ ^ mix(key + 0x9E3779B97F4A7C15ULL)));
    }

    // Uniform in [0,1), 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [0,1), 24 random bits.
    float next_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

    // Unbiased integer in [0, n) via Lemire's multiply-shift rejection.
    uint64_t next_below(uint64_t n) {
        __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
        auto lo = static_cast<uint64_t>(m);
        if (lo < n) {
            const uint64_t t = (0 - n) % n;
            while (lo < t) {
                m = static_cast<__uint128_t>(next_u64()) * n;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    // Standard normal via Box-Muller; the spare value is cached.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_double();  // (0,1]
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    uint64_t seed() const { return seed_; }

private:
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    uint64_t seed_;
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline Tensor rng_uniform(Rng& rng, int64_t n) {
    require(n >= 0, ErrorCategory::input, "rng_uniform count must be >= 0");
    Tensor t({n});
    for (int64_t i = 0; i < n; ++i) t.data[static_cast<size_t>(i)] = rng.next_float();
    return t;
}

namespace detail {

// Binomial(n, p) for small mean via CDF inversion (O(k) expected).
inline int64_t binomial_inversion(Rng& rng, int64_t n, double p) {
    const double q = 1.0 - p;
    const double s = p / q;
    double f = std::exp(static_cast<double>(n) * std::log1p(-p));  // (1-p)^n
    double u = rng.next_double();
    int64_t x = 0;
    while (u > f) {
        u -= f;
        ++x;
        if (x > n) return n;  // guards accumulated rounding at the tail
        f *= s * static_cast<double>(n - x + 1) / static_cast<double>(x);
    }
    return x;
}

// BTRS transformed-rejection sampler (Hormann, "The generation of binomial
// random variates", JSCS 1993). Valid for n*p >= 10 and p <= 0.5.
inline int64_t binomial_btrs(Rng& rng, int64_t n, double p) {
    const double nd = static_cast<double>(n);
    const double spq = std::sqrt(nd * p * (1.0 - p));
    const double b = 1.15 + 2.53 * spq;
    const double a = -0.0873 + 0.0248 * b + 0.01 * p;
    const double c = nd * p + 0.5;
    const double vr = 0.92 - 4.2 / b;
    const double alpha = (2.83 + 5.1 / b) * spq;
    const double lpq = std::log(p / (1.0 - p));
    const double m = std::floor((nd + 1.0) * p);
    const double h = std::lgamma(m + 1.0) + std::lgamma(nd - m + 1.0);
    for (;;) {
        const double u = rng.next_double() - 0.5;
        double v = rng.next_double();
        const double us = 0.5 - std::fabs(u);
        const double kd = std::floor((2.0 * a / us + b) * u + c);
        if (kd < 0.0 || kd > nd) continue;
        if (us >= 0.07 && v <= vr) return static_cast<int64_t>(kd);
        v = v * alpha / (a / (us * us) + b);
        if (std::log(v) <= h - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) +
                               (kd - m) * lpq) {
            return static_cast<int64_t>(kd);
        }
    }
}

}  // namespace detail

// Exact Binomial(n, p) draw. Inversion below mean 10, BTRS above; p > 1/2 is
// handled by sampling the complement.
inline int64_t binomial_draw(Rng& rng, int64_t n, double p) {
    require(p >= 0.0 && p <= 1.0, ErrorCategory::input, "binomial p must be in [0,1]");
    require(n >= 0, ErrorCategory::input, "binomial n must be >= 0");
    if (n == 0 || p == 0.0) return 0;
    if (p == 1.0) return n;
    if (p > 0.5) return n - binomial_draw(rng, n, 1.0 - p);
    if (static_cast<double>(n) * p < 10.0) return detail::binomial_inversion(rng, n, p);
    return detail::binomial_btrs(rng, n, p);
}

}  // namespace saflab
