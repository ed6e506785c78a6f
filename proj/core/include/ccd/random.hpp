#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ccd {

/// Deterministic random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The std:: distributions are implementation-defined, so every
/// transform below is spelled out here:
///   uniform  : top 53 bits of one draw scaled by 2^-53, in [0, 1)
///   normal   : Box-Muller on two uniforms, second value discarded
///   gamma    : Marsaglia-Tsang squeeze method (shape < 1 boosted by U^(1/shape))
///   below(n) : rejection sampling on the raw 64-bit draw
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Gamma(shape, scale).
  double gamma(double shape, double scale);
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent stream seed from a base seed and coordinates.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0) noexcept;

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace ccd
