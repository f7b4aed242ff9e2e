#ifndef SAUP_HASH_HPP
#define SAUP_HASH_HPP

#include <cstdint>
#include <string>

namespace saup {

// FNV-1a, 64-bit. Used for config hashes and weight-blob fingerprints.
inline uint64_t fnv1a64(const void* data, size_t len,
                        uint64_t seed = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

std::string to_hex(uint64_t value);  // 16 lowercase hex digits

}  // namespace saup

#endif  // SAUP_HASH_HPP
