#include "fakeidet/hashing.hpp"

#include <sodium.h>

#include <array>
#include <cstdio>

namespace fakeidet {

namespace {

void append_le64(crypto_generichash_state& st, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  crypto_generichash_update(&st, b.data(), b.size());
}

std::uint64_t finish64(crypto_generichash_state& st) {
  std::array<unsigned char, 8> out{};
  crypto_generichash_final(&st, out.data(), out.size());
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(out[i]) << (8 * i);
  return v;
}

std::uint64_t hash_parts(const unsigned char* key, std::size_t key_len,
                         std::initializer_list<std::string_view> parts) {
  crypto_generichash_state st;
  crypto_generichash_init(&st, key, key_len, 8);
  for (auto p : parts) {
    append_le64(st, p.size());
    crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(p.data()), p.size());
  }
  return finish64(st);
}

}  // namespace

std::uint64_t keyed_hash64(std::uint64_t key, std::initializer_list<std::string_view> parts) {
  std::array<unsigned char, 16> k{};
  for (int i = 0; i < 8; ++i) k[i] = static_cast<unsigned char>(key >> (8 * i));
  return hash_parts(k.data(), k.size(), parts);
}

std::uint64_t keyed_hash64(std::string_view key, std::initializer_list<std::string_view> parts) {
  // BLAKE2b keys are 16..64 bytes; hash arbitrary-length salts down to 32.
  std::array<unsigned char, 32> k{};
  crypto_generichash(k.data(), k.size(), reinterpret_cast<const unsigned char*>(key.data()),
                     key.size(), nullptr, 0);
  return hash_parts(k.data(), k.size(), parts);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  return keyed_hash64(seed, {"fakeidet.seed", purpose});
}

double unit_from_hash(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string content_digest(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, 32> out{};
  crypto_generichash(out.data(), out.size(), bytes.data(), bytes.size(), nullptr, 0);
  std::string hex;
  hex.reserve(64);
  for (auto b : out) {
    char buf[3];
    std::snprintf(buf, sizeof buf, "%02x", b);
    hex += buf;
  }
  return hex;
}

}  // namespace fakeidet
