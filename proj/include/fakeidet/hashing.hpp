#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>

namespace fakeidet {

// Keyed BLAKE2b over a sequence of length-prefixed parts. Used for every
// derived seed and opaque code so results never depend on call order or on
// the platform's standard library.
std::uint64_t keyed_hash64(std::uint64_t key, std::initializer_list<std::string_view> parts);
std::uint64_t keyed_hash64(std::string_view key, std::initializer_list<std::string_view> parts);

// Sub-seed for a named purpose, e.g. derive_seed(seed, "retain").
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);

// Unit-interval value in [0, 1) from the top 53 bits of a hash.
double unit_from_hash(std::uint64_t h);

std::string hex64(std::uint64_t v);

// Hex digest (32 bytes BLAKE2b) of raw bytes, unkeyed.
std::string content_digest(std::span<const std::uint8_t> bytes);

}  // namespace fakeidet
