#pragma once

#include <cstdint>
#include <vector>

#include "freenoise/array.hpp"

namespace freenoise {

/// Frame -> base-noise index mapping for a rescheduled noise sequence.
///
/// The first n_train entries are the identity. Beyond that, frames are laid
/// out in units of `unit` consecutive frames; unit u holds a shuffled copy of
/// the base-index block {(n_train + u*unit + j) mod n_train : j}, so frame i
/// always draws from base index (i mod n_train) up to the in-unit shuffle.
struct ShufflePlan {
  int n_train = 0;
  int unit = 0;
  int total = 0;
  uint64_t seed = 0;
  std::vector<int> mapping;  // length `total`, values in [0, n_train)
};

/// i.i.d. standard-normal frames [C, n_train, H, W] drawn from one stream.
struct BaseNoise {
  Array frames;
};

/// Builds the mapping. unit_size must divide n_train; total >= n_train. The
/// trailing unit may be partial, in which case only its truncated index
/// block is shuffled. Each unit u shuffles under stream (seed, u), so
/// growing `total` never reorders earlier units.
ShufflePlan build_shuffle_plan(int n_train, int unit_size, int total, uint64_t seed);

/// Draws the base noise [C, n_train, H, W] from stream (seed, stream).
BaseNoise make_base_noise(int channels, int n_train, int height, int width, uint64_t seed,
                          uint64_t stream);

/// Expands base frames into `plan.total` frames; output frame i is a bitwise
/// copy of base frame plan.mapping[i].
Array materialize_noise(const ShufflePlan& plan, const BaseNoise& base);

/// True iff every window of `window_size` frames starting at a multiple of
/// `stride` covers the complete base-index multiset {0..n_train-1}.
bool verify_window_coverage(const ShufflePlan& plan, int window_size, int stride);

}  // namespace freenoise
