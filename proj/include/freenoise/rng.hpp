#pragma once

#include <cstdint>
#include <vector>

#include "freenoise/array.hpp"

namespace freenoise {

/// Counter-based random generator keyed by (seed, stream). The same key
/// always yields the same sequence, independent of platform and of any
/// other stream, so each consumer (noise, weights, permutations) owns a
/// stream that cannot be perturbed by adding new consumers.
class Rng {
 public:
  Rng(uint64_t seed, uint64_t stream);

  uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double next_double();

  /// Standard normal via Box-Muller; pairs are cached.
  float next_normal();

  /// Array of i.i.d. standard normals in row-major order.
  Array normal(std::vector<int> shape);

  /// Uniform random permutation of {0..n-1} (Fisher-Yates).
  std::vector<int> permutation(int n);

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }

 private:
  uint64_t bounded(uint64_t bound);  // uniform in [0, bound)

  uint64_t seed_ = 0;
  uint64_t stream_ = 0;
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
  bool have_spare_ = false;
  float spare_ = 0.0f;
};

}  // namespace freenoise
