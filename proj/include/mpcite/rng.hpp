#ifndef MPCITE_RNG_HPP_
#define MPCITE_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mpcite/common.hpp"

namespace mpcite {

// Deterministic RNG wrapper. mt19937_64 raw output is standardized; the
// std::* distributions are not, so all draws are derived here explicitly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), unbiased.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = uniform_below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  // k distinct indices from [0, n), in ascending order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    if (k >= n) {
      std::vector<std::size_t> all(n);
      for (std::size_t i = 0; i < n; ++i) all[i] = i;
      return all;
    }
    // Floyd's algorithm, then sort for stable downstream ordering.
    std::vector<std::size_t> picked;
    picked.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
      std::size_t t = uniform_below(j + 1);
      bool seen = false;
      for (std::size_t p : picked) {
        if (p == t) {
          seen = true;
          break;
        }
      }
      picked.push_back(seen ? j : t);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mpcite

#endif  // MPCITE_RNG_HPP_
