#pragma once

#include <bit>
#include <cstdint>
#include <random>
#include <vector>

namespace fedsim {

using Rng = std::mt19937_64;

// splitmix64 finalizer. All seed derivation in the project goes through
// mix_seed/derive_seed so that streams (init, per-round sampling, per-client
// shuffling, sweep replicates) are independent and stable across versions.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (splitmix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

template <typename... Ids>
constexpr std::uint64_t derive_seed(std::uint64_t base, Ids... ids) {
    std::uint64_t s = splitmix64(base);
    ((s = mix_seed(s, static_cast<std::uint64_t>(ids))), ...);
    return s;
}

inline std::uint64_t seed_bits(double v) { return std::bit_cast<std::uint64_t>(v); }

// Named sub-streams hanging off one experiment seed.
namespace seed_stream {
inline constexpr std::uint64_t init = 0x11a7;
inline constexpr std::uint64_t sampling = 0x5a3c;
inline constexpr std::uint64_t local = 0x10ca1;
inline constexpr std::uint64_t sweep = 0x53ee9;
} // namespace seed_stream

// One draw from a symmetric Dirichlet(alpha) over k categories (alpha > 0).
inline std::vector<double> dirichlet_draw(Rng& rng, double alpha, std::size_t k) {
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> out(k);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        out[i] = gamma(rng);
        total += out[i];
    }
    if (total <= 0.0) {
        // All-zero draw is possible for tiny alpha at double precision;
        // fall back to a single uniformly chosen category.
        std::uniform_int_distribution<std::size_t> pick(0, k - 1);
        for (std::size_t i = 0; i < k; ++i) out[i] = 0.0;
        out[pick(rng)] = 1.0;
        return out;
    }
    for (std::size_t i = 0; i < k; ++i) out[i] /= total;
    return out;
}

} // namespace fedsim
