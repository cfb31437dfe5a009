#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace pairuni {

// splitmix64 (Steele/Lea/Flood). Counter-based: the state advances by a fixed
// increment and the output is a pure mix of it, so streams derived from
// distinct seeds never interact and every draw is reproducible regardless of
// which other streams were consumed in between.
struct Rng {
    std::uint64_t state = 0;

    explicit Rng(std::uint64_t seed = 0) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 usable bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n) via Lemire's multiply-shift.
    std::uint64_t uniform_index(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    // Standard normal, Box-Muller. Consumes two draws per pair of values.
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return detail::mix64(a + 0x9e3779b97f4a7c15ULL + (b << 1));
}

inline std::uint64_t hash_string(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a basis
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return detail::mix64(h);
}

// Derives an independent child stream from a root seed and a tag path.
// All randomness in the project flows from one root seed through this.
inline std::uint64_t derive_seed(std::uint64_t root, const std::string& tag) {
    return hash_combine(root, hash_string(tag));
}

inline std::uint64_t derive_seed(std::uint64_t root, const std::string& tag,
                                 std::uint64_t a) {
    return hash_combine(derive_seed(root, tag), a);
}

inline std::uint64_t derive_seed(std::uint64_t root, const std::string& tag,
                                 std::uint64_t a, std::uint64_t b) {
    return hash_combine(derive_seed(root, tag, a), b);
}

inline std::uint64_t derive_seed(std::uint64_t root, const std::string& tag,
                                 std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return hash_combine(derive_seed(root, tag, a, b), c);
}

}  // namespace pairuni
