#pragma once

// Counter-based random numbers: every draw is a pure function of
// (seed, domain, stream, counter), so parallel workers reproduce the same values
// regardless of scheduling.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dss::rng {

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Separates otherwise identical key tuples used for different purposes.
enum class Domain : std::uint64_t {
    placement = 0x706C6163656D656EULL,
    noise = 0x6E6F697365000000ULL,
    synth = 0x73796E7468000000ULL,
};

constexpr std::uint64_t counter_hash(std::uint64_t seed, Domain domain, std::uint64_t stream,
                                     std::uint64_t counter) noexcept {
    std::uint64_t h = mix64(seed + 0x9E3779B97F4A7C15ULL);
    h = mix64(h ^ static_cast<std::uint64_t>(domain));
    h = mix64(h + 0xD1B54A32D192ED03ULL * (stream + 1));
    h = mix64(h ^ (0x8CB92BA72F3D8DD7ULL * (counter + 1)));
    return h;
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t h) noexcept { return static_cast<double>(h >> 11) * 0x1.0p-53; }

/// Sequential view over one (seed, domain, stream) key.
class CounterStream {
public:
    constexpr CounterStream(std::uint64_t seed, Domain domain, std::uint64_t stream) noexcept
        : seed_(seed), domain_(domain), stream_(stream) {}

    constexpr std::uint64_t next_u64() noexcept { return counter_hash(seed_, domain_, stream_, counter_++); }
    constexpr double uniform() noexcept { return to_unit(next_u64()); }

    /// Integer in [0, bound) by multiply-high; bias is below bound / 2^64.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller (one value per two draws).
    double normal() noexcept {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    constexpr std::uint64_t position() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    Domain domain_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

}  // namespace dss::rng
