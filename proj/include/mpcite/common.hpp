#ifndef MPCITE_COMMON_HPP_
#define MPCITE_COMMON_HPP_

#include <bit>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mpcite {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// FNV-1a, used for vocab/checkpoint fingerprints and seed derivation.
inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt) {
  return mix_seed(seed, fnv1a64(salt));
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

static_assert(std::endian::native == std::endian::little,
              "binary file formats assume a little-endian host");

}  // namespace mpcite

#endif  // MPCITE_COMMON_HPP_
