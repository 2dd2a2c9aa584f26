#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace seqac {

/// Seeded generator used for every random draw in the library. There is no
/// global generator; callers pass one explicitly.
///
/// Draws are built from raw 64-bit outputs rather than std:: distributions so
/// sequences are identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Independent generator for a named sub-stream, derived with splitmix64.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  /// Samples an index from a (not necessarily normalized) non-negative weight vector.
  std::size_t categorical(std::span<const double> weights);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace seqac
