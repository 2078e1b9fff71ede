/*
Copyright 2026 The granloc Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

// Portable deterministic randomness. std:: distributions are implementation
// defined, so every draw used for dataset curation goes through these helpers
// and is reproducible bit-for-bit in any language.
//
//   stream state s: s += 0x9E3779B97F4A7C15; z = mix(s)
//   mix(z): z = (z ^ z>>30) * 0xBF58476D1CE4E5B9;
//           z = (z ^ z>>27) * 0x94D049BB133111EB; z ^ z>>31
//   uniform01: (next() >> 11) * 2^-53
//   below(n):  rejection sampling on next() against 2^64 - (2^64 mod n),
//              then next() mod n
//   stream keyed by a string: state = mix(seed ^ fnv1a64(key))

#include <cstdint>
#include <string_view>

namespace granloc {

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  /// Stream derived from a seed and a key, e.g. one stream per category.
  static constexpr SplitMix64 keyed(std::uint64_t seed, std::string_view key) noexcept {
    return SplitMix64(splitmix64_mix(seed ^ fnv1a64(key)));
  }

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return splitmix64_mix(state_);
  }

  constexpr double uniform01() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be positive.
  constexpr std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next();
      if (r >= limit) return r % n;
    }
  }

  /// Uniform real in [lo, hi).
  constexpr double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform01();
  }

 private:
  std::uint64_t state_;
};

}  // namespace granloc
