#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "crossbid/core/error.hpp"

namespace crossbid {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Combines a seed with stream tags into an independent sub-seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    s = splitmix64(s ^ c);
    return s;
}

/// mt19937_64 engine with hand-rolled distributions so that sampled values
/// are identical across standard libraries and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed), base_(seed) {}

    /// Independent substream keyed by tags; safe to call repeatedly with the
    /// same tags (pure function of the constructing seed).
    Rng derive(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        return Rng(derive_seed(base_, a, b, c));
    }

    std::uint64_t next() { return eng_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    int uniform_int(int n) {
        CB_REQUIRE(n > 0, "uniform_int: n must be positive, got ", n);
        int k = static_cast<int>(uniform() * n);
        return k < n ? k : n - 1;
    }

    /// Standard normal via Box-Muller (no caching: one draw consumes two
    /// uniforms, keeping the stream layout position-independent).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Poisson via Knuth's product method; large rates are split so the
    /// running product never underflows.
    int poisson(double lambda) {
        CB_REQUIRE(lambda >= 0.0, "poisson: rate must be nonnegative, got ", lambda);
        if (lambda == 0.0) return 0;
        int total = 0;
        while (lambda > 500.0) {
            total += poisson_knuth(500.0);
            lambda -= 500.0;
        }
        return total + poisson_knuth(lambda);
    }

private:
    int poisson_knuth(double lambda) {
        const double limit = std::exp(-lambda);
        double prod = 1.0;
        int k = 0;
        do {
            ++k;
            prod *= uniform();
        } while (prod > limit);
        return k - 1;
    }

    std::mt19937_64 eng_;
    std::uint64_t base_;
};

} // namespace crossbid
