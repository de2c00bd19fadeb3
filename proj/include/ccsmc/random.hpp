#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace ccsmc {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer (Steele, Lea & Flood, 2014).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a substream seed from a master seed and a path of indices,
/// e.g. derive_seed(master, {repetition, method, level, particle}).
/// Each path component is folded in with a full SplitMix64 round so that
/// neighbouring paths give unrelated seeds.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = mix64(master);
    for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

/// Stream tags used as the second component of seed paths.
enum class Stream : std::uint64_t {
    quantiles = 1,
    mc = 2,
    smc = 3,
    is_ach = 4,
    stddev = 5,
    resample = 6,
    mutate = 7,
    move = 8,
    init = 9,
};

constexpr std::uint64_t tag(Stream s) noexcept { return static_cast<std::uint64_t>(s); }

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform on the open interval (0,1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double exponential1(Rng& rng) { return -std::log(uniform01(rng)); }

inline double gamma_variate(Rng& rng, double shape) {
    std::gamma_distribution<double> g(shape, 1.0);
    return g(rng);
}

}  // namespace ccsmc
