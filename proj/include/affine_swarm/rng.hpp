#pragma once

// Counter-based random streams. Every random quantity in a run (edge
// availability, measurement noise, initial perturbation) is derived from a key
// built out of the root seed and the identity of the quantity, so draws do not
// depend on evaluation order or on which estimator is running.

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace affine_swarm {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Domain tags keep streams for different purposes disjoint.
enum class StreamTag : std::uint64_t {
  kEdgeAvailability = 1,
  kMeasurementNoise = 2,
  kInitialPosition = 3,
};

inline std::uint64_t stream_key(std::uint64_t root, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = splitmix64(root);
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

/// SplitMix64 generator satisfying UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : state_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(*this); }

 private:
  std::uint64_t state_;
};

inline double keyed_uniform(std::uint64_t key) { return CounterRng(key).uniform(); }

}  // namespace affine_swarm
