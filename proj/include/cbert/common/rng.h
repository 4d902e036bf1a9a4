#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace cbert {

// Seeded random stream. The engine is std::mt19937_64; the draws below are
// written out by hand so that a given seed produces the same sequence with
// every standard library (std::*_distribution is implementation-defined).
//
// Streams are derived from a root seed by name:
//   derive_seed(root, "shuffle", epoch)
// hashes the name with FNV-1a, folds in the root and index, and finishes
// with a splitmix64 round. Distinct names or indices give independent
// streams, so work can be split or reordered without changing results.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  // Standard normal via Box-Muller; caches the second variate.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

inline Rng derive_rng(std::uint64_t root, std::string_view stream, std::uint64_t index = 0) {
  return Rng(derive_seed(root, stream, index));
}

}  // namespace cbert
