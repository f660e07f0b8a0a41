#pragma once

// Seedable, splittable random streams. A stream derived with substream(key)
// is statistically independent of its parent and of sibling keys, so work
// parallelized across rados (or across noise coordinates) produces the same
// bits regardless of schedule: stream identity depends only on the keys.

#include <cstdint>

namespace rado {

namespace detail {

// 64-bit finalizer with full avalanche (splitmix64).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

}  // namespace detail

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed)
      : state_(detail::mix64(seed + detail::kGoldenGamma)) {}

  // Independent child stream keyed by `key`; deterministic in (parent, key).
  RandomStream substream(std::uint64_t key) const {
    RandomStream child(0);
    child.state_ = detail::mix64(state_ ^ detail::mix64(key + detail::kGoldenGamma));
    return child;
  }

  std::uint64_t next_u64() {
    state_ += detail::kGoldenGamma;
    return detail::mix64(state_);
  }

  bool next_bool() { return (next_u64() >> 63) != 0; }

  // Uniform on [0,1), 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on the open interval (0,1).
  double next_open_unit() {
    double u;
    do {
      u = next_unit();
    } while (u == 0.0);
    return u;
  }

 private:
  std::uint64_t state_;
};

}  // namespace rado
