#include "freenoise/noise_schedule.hpp"

#include <algorithm>

#include "freenoise/rng.hpp"

namespace freenoise {

ShufflePlan build_shuffle_plan(int n_train, int unit_size, int total, uint64_t seed) {
  if (n_train < 1 || unit_size < 1) {
    throw ConfigError("n_train and unit_size must be >= 1");
  }
  if (n_train % unit_size != 0) {
    throw ConfigError("unit_size " + std::to_string(unit_size) + " must divide n_train " +
                      std::to_string(n_train));
  }
  if (total < n_train) {
    throw ConfigError("total " + std::to_string(total) + " must be >= n_train " +
                      std::to_string(n_train));
  }
  ShufflePlan plan{n_train, unit_size, total, seed, {}};
  plan.mapping.resize(static_cast<size_t>(total));
  for (int i = 0; i < n_train; ++i) plan.mapping[i] = i;

  for (int unit = 0; n_train + unit * unit_size < total; ++unit) {
    const int begin = n_train + unit * unit_size;
    const int len = std::min(unit_size, total - begin);
    // base-index block for this unit; contiguous because unit_size | n_train
    const int block_start = (unit * unit_size) % n_train;
    Rng rng(seed, static_cast<uint64_t>(unit));
    const std::vector<int> perm = rng.permutation(len);
    for (int j = 0; j < len; ++j) {
      plan.mapping[begin + j] = block_start + perm[j];
    }
  }
  return plan;
}

BaseNoise make_base_noise(int channels, int n_train, int height, int width, uint64_t seed,
                          uint64_t stream) {
  Rng rng(seed, stream);
  return BaseNoise{rng.normal({channels, n_train, height, width})};
}

Array materialize_noise(const ShufflePlan& plan, const BaseNoise& base) {
  if (base.frames.ndim() != 4) {
    throw ShapeError("base noise must be [C,N,H,W], got " + base.frames.shape_str());
  }
  if (base.frames.extent(1) != plan.n_train) {
    throw ShapeError("base noise has " + std::to_string(base.frames.extent(1)) +
                     " frames, plan expects " + std::to_string(plan.n_train));
  }
  Array out({base.frames.extent(0), plan.total, base.frames.extent(2), base.frames.extent(3)});
  for (int i = 0; i < plan.total; ++i) {
    copy_frame(base.frames, plan.mapping[i], out, i);
  }
  return out;
}

bool verify_window_coverage(const ShufflePlan& plan, int window_size, int stride) {
  if (window_size > plan.total || stride < 1) return false;
  std::vector<int> counts(static_cast<size_t>(plan.n_train));
  for (int start = 0; start + window_size <= plan.total; start += stride) {
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = start; i < start + window_size; ++i) {
      ++counts[static_cast<size_t>(plan.mapping[i])];
    }
    // full multiset: window_size == n_train * k with each index seen k times
    const int expect = window_size / plan.n_train;
    if (window_size % plan.n_train != 0) return false;
    for (int c : counts) {
      if (c != expect) return false;
    }
  }
  return true;
}

}  // namespace freenoise
