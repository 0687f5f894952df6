#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace mnl {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Small counter-style generator. Streams are derived from a key tuple
/// (seed, episode, stage, ...) so a draw never depends on how many numbers
/// other streams consumed. All distributions are implemented here, so the
/// output is identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : state_(mix64(seed)) {}

    /// Independent stream for a key tuple.
    static Rng keyed(std::uint64_t seed, std::initializer_list<std::uint64_t> key) noexcept {
        std::uint64_t h = mix64(seed ^ 0x5851f42d4c957f2dULL);
        for (auto k : key) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
        Rng r;
        r.state_ = h;
        return r;
    }

    std::uint64_t next_u64() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Uses rejection to avoid modulo bias.
    std::uint64_t below(std::uint64_t n) noexcept {
        if (n <= 1) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    bool coin() noexcept { return (next_u64() >> 63) != 0; }

    /// Standard normal via Box-Muller (no cached second variate).
    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

} // namespace mnl
