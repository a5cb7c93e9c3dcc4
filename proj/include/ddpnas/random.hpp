#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ddpnas {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// FNV-1a, used only to turn substream tags into 64-bit words.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace detail

/// Derives a named substream seed.
///
/// derive(seed, "engine", round, slot) folds each word through SplitMix64 in
/// order, so the result depends on the full (seed, tag, indices...) tuple and
/// on nothing else. Substreams used by the library:
///   "engine"/round          -> disjoint-sampling permutations of a round
///   "slot"/round/slot       -> per-architecture stream handed to evaluators
///   "oracle"                -> oracle-internal state (weights init, data)
///   "landscape-gen"         -> synthetic landscape generation
///   "baseline"              -> random-sample baseline
///   "trial"/index           -> Monte Carlo trial seeds
template <typename... Words>
constexpr std::uint64_t derive(std::uint64_t seed, std::string_view tag, Words... words) noexcept
{
    std::uint64_t h = detail::splitmix64(seed ^ detail::fnv1a(tag));
    ((h = detail::splitmix64(h ^ static_cast<std::uint64_t>(words))), ...);
    return h;
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

}  // namespace ddpnas
