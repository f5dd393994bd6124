#pragma once

#include <cstdint>
#include <string_view>

namespace dfdm {

namespace detail {

// splitmix64 finalizer. Pure 64-bit integer arithmetic, so streams are
// identical on every platform for a given seed.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t combine(std::uint64_t seed, std::uint64_t label) {
    return mix64(seed ^ (label + 0x9E3779B97F4A7C15ull + (seed << 6) + (seed >> 2)));
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace detail

/// Deterministic seeded generator: a splitmix64 counter stream.
///
/// Child streams derive from the *construction* seed and a label, never from
/// the current position, so splitting is reproducible no matter how much of
/// the parent stream has been consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return detail::mix64(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Unbiased-enough bounded draw for shuffling (Lemire multiply-shift).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    Rng split(std::uint64_t label) const {
        return Rng(detail::combine(seed_, label));
    }

    Rng split(std::string_view label) const {
        return split(detail::fnv1a(label));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace dfdm
