#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "devsnet/core/bytes.hpp"

namespace devsnet {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded generator with portable uniform draws.
///
/// std::uniform_real_distribution is implementation-defined, so draws are
/// built directly from the engine output to keep traces identical across
/// standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Stream derived from a root seed by a fixed label. Adding a new label
  /// never shifts the streams of existing ones.
  static Rng stream(std::uint64_t root_seed, std::string_view label) {
    return Rng(splitmix64(root_seed ^ fnv1a64(label)));
  }
  static Rng stream(std::uint64_t root_seed, std::string_view label, std::uint64_t index) {
    return Rng(splitmix64(splitmix64(root_seed ^ fnv1a64(label)) + index));
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  bool operator==(const Rng&) const = default;

private:
  std::mt19937_64 engine_;
};

}  // namespace devsnet
