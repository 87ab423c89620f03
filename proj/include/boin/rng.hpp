#pragma once

// Reproducible random streams. Each replicate gets its own engine seeded from a
// hash of (master seed, stream id, replicate index), so replicates can run in
// any order or on any thread and still produce identical results.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace boin {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// FNV-1a, used to turn scenario names into stream ids.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) noexcept
{
    return mix64(mix64(mix64(master) ^ stream) ^ index);
}

/// Thin wrapper over mt19937_64 with portable uniform/normal/binomial draws.
/// The standard distribution classes are implementation-defined, so they are
/// avoided to keep results identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (both variates used).
    double normal() noexcept
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Binomial(n, p) as a sum of Bernoulli draws; n is a cohort size here.
    int binomial(int n, double p) noexcept
    {
        int k = 0;
        for (int i = 0; i < n; ++i) k += uniform() < p ? 1 : 0;
        return k;
    }

    std::uint64_t next() noexcept { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace boin
