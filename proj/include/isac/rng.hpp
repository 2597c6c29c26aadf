#pragma once

// Counter-based random streams.
//
// Every draw in the library comes from a stream keyed by (seed, purpose,
// index, subindex). The key is hashed once; the stream then evaluates the
// SplitMix64 output function on key + counter * golden. Two streams with
// different keys never share state, so results do not depend on the order in
// which streams are consumed or on how work is split across threads.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace isac {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// One independent stream of variates. Cheap to copy; copying forks the state.
class RandomStream {
 public:
  explicit constexpr RandomStream(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t next_u64() noexcept {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Seed holder that hands out named substreams.
class Rng {
 public:
  explicit constexpr Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }

  RandomStream stream(std::string_view purpose, std::uint64_t index,
                      std::uint64_t subindex = 0) const noexcept {
    std::uint64_t k = detail::mix64(seed_ ^ detail::kGolden);
    k = detail::mix64(k ^ detail::fnv1a(purpose));
    k = detail::mix64(k ^ (index * detail::kGolden + 0x632BE59BD9B4E019ULL));
    k = detail::mix64(k ^ (subindex + 0xD6E8FEB86659FD93ULL));
    return RandomStream(k);
  }

 private:
  std::uint64_t seed_;
};

}  // namespace isac
