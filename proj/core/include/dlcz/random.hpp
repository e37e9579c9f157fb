#pragma once

#include <cmath>
#include <cstdint>

namespace dlcz::rng {

// Counter-based splittable stream. State and increment are both derived from
// (seed, key1, key2), so stream(seed, entry, trial) can be reconstructed on any
// worker, in any order, with bit-identical output. The generator is a SplitMix
// variant: an odd per-stream increment walks a 64-bit counter through a strong
// finalizer.
class Stream {
public:
    static constexpr uint64_t golden = 0x9e3779b97f4a7c15ull;

    static constexpr uint64_t mix(uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static Stream from(uint64_t seed, uint64_t key1, uint64_t key2) noexcept {
        uint64_t h = mix(seed + golden);
        h = mix(h ^ (key1 + 0x452821e638d01377ull));
        h = mix(h ^ (key2 + 0xc2b2ae3d27d4eb4full));
        Stream s;
        s.state_ = h;
        s.gamma_ = mix(h + golden) | 1ull; // odd increment, full 2^64 period
        return s;
    }

    uint64_t next_u64() noexcept {
        state_ += gamma_;
        return mix(state_);
    }

    // uniform in [0, 1) with 53-bit resolution
    double uniform() noexcept { return double(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    // P(n) = (1 - p) p^n for n = 0, 1, 2, ... (thermal photon-number law)
    int thermal(double p) noexcept {
        if (p <= 0.0) return 0;
        double v = 1.0 - uniform(); // in (0, 1]
        if (v > p) return 0;        // carries the full n = 0 mass of 1 - p
        return int(std::floor(std::log(v) / std::log(p)));
    }

    int binomial(int n, double q) noexcept {
        int m = 0;
        for (int i = 0; i < n; ++i) m += bernoulli(q) ? 1 : 0;
        return m;
    }

    double normal() noexcept {
        double u1 = 1.0 - uniform(); // (0, 1] keeps the log finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Exact (Knuth) below 60; Gaussian rounding above, where the approximation
    // error sits far below the statistical resolution of any consumer here.
    long long poisson(double mean) noexcept {
        if (mean <= 0.0) return 0;
        if (mean < 60.0) {
            const double limit = std::exp(-mean);
            double prod = uniform();
            long long n = 0;
            while (prod > limit) {
                prod *= uniform();
                ++n;
            }
            return n;
        }
        long long n = std::llround(mean + std::sqrt(mean) * normal());
        return n < 0 ? 0 : n;
    }

private:
    uint64_t state_ = 0;
    uint64_t gamma_ = golden | 1ull;
};

} // namespace dlcz::rng
