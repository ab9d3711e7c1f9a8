#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace maxdep {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Purposes keep streams for different jobs under the same seed apart.
enum class StreamPurpose : std::uint64_t {
  simulation = 1,
  bootstrap = 2,
  multiplier = 3,
  monte_carlo = 4,
  fixture = 5,
};

/// Random source with platform-independent variate generation.
///
/// Only the raw 64-bit output of std::mt19937_64 is used; uniforms,
/// exponentials and normals are derived here so the produced streams do not
/// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  /// Stream keyed by (seed, purpose, index); independent of call order.
  static Rng stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index) {
    const std::uint64_t key =
        mix64(seed ^ mix64(static_cast<std::uint64_t>(purpose) * 0xD1B54A32D192ED03ULL + mix64(index)));
    return Rng(key);
  }

  /// Plain 64-bit seed derived from (seed, purpose, index), for APIs that
  /// take a seed rather than a generator.
  static std::uint64_t derive_seed(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index) {
    return mix64(seed + 0x632BE59BD9B4E019ULL * (static_cast<std::uint64_t>(purpose) + 1) ^ mix64(~index));
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unit-rate exponential.
  double exponential() { return -std::log(uniform()); }

  /// Standard normal via Box-Muller; the second value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace maxdep
