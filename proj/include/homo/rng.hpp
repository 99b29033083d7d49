#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace homo {

// Counter-based SplitMix64 stream with Box-Muller normals.
//
// Bit-exact definition (ports must reproduce it):
//   gamma        = 0x9E3779B97F4A7C15
//   mix(z)       : z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//                  z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//                  z ^ (z >> 31)
//   next_u64()   : counter += 1; return mix(key + counter * gamma)
//   uniform()    : (next_u64() >> 11) * 2^-53                      in [0, 1)
//   normal()     : if a spare is cached return it; otherwise
//                  u1 = 1 - uniform(), u2 = uniform(),
//                  r = sqrt(-2 ln u1), spare = r sin(2 pi u2),
//                  return r cos(2 pi u2)
//   index(n)     : (next_u64() * n) >> 64 using 128-bit arithmetic
//   split(s)     : child key = mix(key ^ (s + 1) * 0xD1B54A32D192ED03),
//                  counter 0, no spare
class SeededRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kSplitMultiplier = 0xD1B54A32D192ED03ULL;

  explicit SeededRng(std::uint64_t seed) : key_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + counter_ * kGamma);
  }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  SeededRng split(std::uint64_t stream) const {
    return SeededRng(mix(key_ ^ ((stream + 1) * kSplitMultiplier)));
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace homo
