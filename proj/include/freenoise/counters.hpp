#pragma once

#include <algorithm>

namespace freenoise {

/// Exact instrumentation counters filled in by the model and sampler.
/// pair-ops accumulate sum(U^2) over attention windows per temporal
/// attention layer invocation, so pair_ops / invocations is the per-layer
/// cost of one forward pass.
struct PassCounters {
  long long unet_passes = 0;
  long long temporal_attn_invocations = 0;
  long long temporal_attn_pair_ops = 0;
  long long cur_frames = 0;
  long long peak_frames = 0;

  void acquire_frames(long long f) {
    cur_frames += f;
    peak_frames = std::max(peak_frames, cur_frames);
  }
  void release_frames(long long f) { cur_frames -= f; }
};

}  // namespace freenoise
