#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freenoise/array.hpp"
#include "freenoise/counters.hpp"
#include "freenoise/model.hpp"
#include "freenoise/sampler.hpp"

namespace freenoise {

/// Fixed seeded frame featurizer: mean-over-channels grayscale, 8x8 box
/// downsample, a row-orthonormal random 64x64 projection, L2 normalization.
/// A deterministic stand-in for a semantic feature network.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(uint64_t seed = 0x66656174);

  /// Unit-norm 64-dim feature of one frame of video[C,M,H,W].
  std::vector<double> frame_feature(const Array& video, int frame) const;
  std::vector<std::vector<double>> video_features(const Array& video) const;

 private:
  std::vector<double> projection_;  // [64][64], row-orthonormal
};

/// Mean cosine similarity over all adjacent frame pairs; needs >= 2 frames.
double consistency_sim(const Array& video, const FeatureExtractor& fx);
double consistency_sim(const Array& video);

/// Squared Frechet distance between diagonal Gaussians fitted to the pooled
/// per-frame features of each video set; each set needs >= 2 videos.
double frechet_feature_distance(const std::vector<Array>& set_a, const std::vector<Array>& set_b,
                                const FeatureExtractor& fx);
double frechet_feature_distance(const std::vector<Array>& set_a, const std::vector<Array>& set_b);

// ============================================================================
// Compute accounting and benchmark
// ============================================================================

struct PassCountReport {
  long long passes_per_step_per_branch = 0;
  long long pair_ops_per_layer = 0;  // sum(U^2) over attention windows
};

/// Instrumented dry run of a single denoising step (both CFG branches).
PassCountReport count_model_passes(const SamplerConfig& cfg, const ToyVideoLdm& model);

struct ModeStats {
  SamplerMode mode = SamplerMode::Direct;
  double median_seconds = 0.0;
  double seconds_per_step = 0.0;
  long long passes_per_step_per_branch = 0;
  long long pair_ops_per_layer = 0;
  long long peak_frames = 0;
};

struct BenchReport {
  int repetitions = 0;
  int steps = 0;
  std::vector<ModeStats> rows;
};

/// Times `repetitions` full sampling runs per mode (plus one discarded
/// warm-up) and reports medians with the exact instrumented counters.
BenchReport run_benchmark(const std::vector<SamplerMode>& modes, SamplerConfig cfg,
                          const ToyVideoLdm& model, const DiffusionSchedule& sched,
                          int repetitions);

std::string format_report_table(const BenchReport& report);
std::string format_report_key_values(const BenchReport& report);

}  // namespace freenoise
