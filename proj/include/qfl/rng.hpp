#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qfl {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a root seed and a tuple of ids,
/// e.g. derive_seed(seed, {stream_tag, client_id, round}).
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> ids) noexcept {
    std::uint64_t h = mix64(root);
    for (auto id : ids) h = mix64(h ^ mix64(id + 0x632be59bd9b4e019ULL));
    return h;
}

/// Uniform double in [0, 1) from the top 53 bits of a hash.
constexpr double unit_interval(std::uint64_t h) noexcept {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Stream tags keep the derived RNG families disjoint.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kPartition = 2;
inline constexpr std::uint64_t kClientTrain = 3;
inline constexpr std::uint64_t kPoison = 4;
inline constexpr std::uint64_t kCraft = 5;
inline constexpr std::uint64_t kMalicious = 6;
inline constexpr std::uint64_t kData = 7;
inline constexpr std::uint64_t kShots = 8;
inline constexpr std::uint64_t kProbe = 9;
}  // namespace stream

}  // namespace qfl
