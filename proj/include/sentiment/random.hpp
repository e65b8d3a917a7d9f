#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace sentiment {

/// Seeded generator with a fixed, portable algorithm.
///
/// The engine is the standard 64-bit Mersenne Twister (std::mt19937_64, whose
/// output sequence is fixed by the C++ standard). Every derived draw below is
/// computed here rather than through <random> distributions, whose algorithms
/// are implementation-defined, so a seed yields the same partitions and
/// initial weights on every conforming toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, bound) by rejection sampling; bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound);

  /// Uniform double in [0, 1) from the top 53 bits of one draw.
  double uniform01();

  /// Standard normal via the Box-Muller transform (one value per call).
  double normal();

  /// Normal(0, stddev) resampled until |x| <= 2 * stddev.
  double truncated_normal(double stddev);

  /// In-place Fisher-Yates: for i = n-1 down to 1, swap(v[i], v[uniform_below(i+1)]).
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a base seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace sentiment
