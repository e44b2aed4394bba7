#pragma once

#include <cstdint>

namespace amlopt {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream seed for (base, purpose, index).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t purpose, std::uint64_t index) {
    return mix64(mix64(mix64(base) ^ purpose) ^ index);
}

namespace seed_purpose {
inline constexpr std::uint64_t ensemble = 1;
inline constexpr std::uint64_t inner_run = 2;
inline constexpr std::uint64_t training = 3;
inline constexpr std::uint64_t split = 4;
inline constexpr std::uint64_t restart = 5;
}  // namespace seed_purpose

}  // namespace amlopt
