#pragma once

#include <cmath>
#include <cstdint>

#include "odebn/error.hpp"

namespace odebn {

namespace detail {

// SplitMix64 finalizer. Bijective with strong avalanche, so chaining it over
// the key components gives well-separated stream states.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Purpose tags keep the random streams of unrelated pipeline stages disjoint
/// even when their (step, element) counters coincide.
namespace stream_purpose {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kTransition = 2;
inline constexpr std::uint64_t kResample = 3;
inline constexpr std::uint64_t kSchedule = 4;
inline constexpr std::uint64_t kEvidenceNoise = 5;
inline constexpr std::uint64_t kGeneric = 6;
}  // namespace stream_purpose

/// Counter-keyed random stream: the state is a pure function of
/// (seed, purpose, step, element), so any particle at any step owns an
/// independent stream regardless of which thread touches it or in what order.
/// That is what makes filter output invariant under the degree of parallelism.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t step,
               std::uint64_t element) {
    std::uint64_t h = detail::mix64(seed + 0x9E3779B97F4A7C15ull);
    h = detail::mix64(h ^ purpose);
    h = detail::mix64(h ^ step);
    h = detail::mix64(h ^ element);
    state_ = h;
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return detail::mix64(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second draw of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Rejection-sample Normal(mean, sd) restricted to (lo, hi).
  /// Throws when the acceptance rate drops below 1e-3, which indicates a
  /// misconfigured prior rather than bad luck.
  double truncated_normal(double mean, double sd, double lo, double hi) {
    constexpr int kMaxAttempts = 100000;
    for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
      double v = normal(mean, sd);
      if (v > lo && v < hi) return v;
    }
    throw_validation(
        "truncated prior acceptance rate below 1e-3: mean " +
        std::to_string(mean) + ", sd " + std::to_string(sd) + " against (" +
        std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }

 private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace odebn
