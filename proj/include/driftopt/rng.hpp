#pragma once

// Counter-based splittable random numbers. A 64-bit stream key is derived
// from (seed, stream index); draws are a pure function of (key, counter),
// so path j of a batch can be generated on any thread, in any order, with
// bit-identical output. The mixer is the SplitMix64 finalizer.

#include <cmath>
#include <cstdint>

namespace driftopt {

inline constexpr std::uint64_t kRngGamma = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kRngGamma2 = 0xD1B54A32D192ED03ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

/// Key of substream `index` under a master seed.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed + (index + 1) * kRngGamma);
}

constexpr std::uint64_t u64_at(std::uint64_t key, std::uint64_t counter) {
  return mix64(key + (counter + 1) * kRngGamma2);
}

/// Uniform on the open interval (0,1); never returns an endpoint.
inline double uniform01_at(std::uint64_t key, std::uint64_t counter) {
  return (static_cast<double>(u64_at(key, counter) >> 11) + 0.5) * 0x1p-53;
}

/// Standard normal draw addressed by index (Box-Muller, cosine branch).
inline double gaussian_at(std::uint64_t key, std::uint64_t index) {
  const double u1 = uniform01_at(key, 2 * index);
  const double u2 = uniform01_at(key, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Sequential view over one stream.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(stream_key(seed, stream)) {}

  std::uint64_t next_u64() { return u64_at(key_, counter_++); }
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }
  double normal() {
    const double u1 = uniform01_at(key_, counter_++);
    const double u2 = uniform01_at(key_, counter_++);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace driftopt
