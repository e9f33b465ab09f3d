// Copyright 2026 The sparse3d Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random number generation.
//
// The standard distributions (std::uniform_int_distribution, std::shuffle,
// std::normal_distribution) are implementation-defined: libstdc++ and libc++
// consume engine output differently, so seeded runs would not reproduce
// across toolchains. Everything random in this library goes through the
// fixed algorithms below, which produce identical streams on any conforming
// platform. The generator is SplitMix64 (Steele, Lea, Flood; the java.util
// SplittableRandom finalizer), which passes BigCrush and needs only 64 bits
// of state.

#ifndef SPARSE3D_RNG_HPP_
#define SPARSE3D_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace sparse3d {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t threshold = (0ULL - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller. No cached spare: every call consumes
  // exactly two generator outputs, which keeps call sites reproducible.
  double gaussian() {
    const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Fisher-Yates with the fixed bounded-int scheme above.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Order-sensitive mix of two words (SplitMix64 finalizer over a combined
// state), for deriving independent sub-seeds.
inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a over the bytes of a string, for seeding from identifiers.
inline std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed for a named sub-stream: mixes the global seed, a role tag, and up
// to two integer coordinates (scene index, epoch, ...).
inline std::uint64_t seed_from(std::uint64_t global_seed, std::string_view tag,
                               std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = hash_combine(global_seed, hash_string(tag));
  h = hash_combine(h, a);
  h = hash_combine(h, b);
  return h;
}

}  // namespace sparse3d

#endif  // SPARSE3D_RNG_HPP_
