#pragma once

#include <cstdint>
#include <string_view>

namespace cper {

// Stable 64-bit hashes. std::hash is not specified across implementations,
// and everything seeded from these must reproduce byte-for-byte.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0);
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

}  // namespace cper
