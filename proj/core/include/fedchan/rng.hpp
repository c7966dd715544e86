#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace fedchan {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for a child stream identified by `tags` under `seed`. Distinct tag
/// sequences give unrelated streams; the result is platform independent.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

/// Stable 64-bit hash of a string (FNV-1a), for tags such as city names.
std::uint64_t hash_tag(std::string_view text);

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    return Rng(derive_seed(seed, tags));
}

}  // namespace fedchan
