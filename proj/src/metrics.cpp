#include "freenoise/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "freenoise/condition.hpp"
#include "freenoise/rng.hpp"

namespace freenoise {

namespace {

constexpr int kGrid = 8;
constexpr int kFeatDim = kGrid * kGrid;

}  // namespace

FeatureExtractor::FeatureExtractor(uint64_t seed) {
  Rng rng(seed, 0);
  projection_.resize(kFeatDim * kFeatDim);
  for (double& v : projection_) v = static_cast<double>(rng.next_normal());
  // Gram-Schmidt row orthonormalization
  for (int r = 0; r < kFeatDim; ++r) {
    double* row = projection_.data() + r * kFeatDim;
    for (int p = 0; p < r; ++p) {
      const double* prev = projection_.data() + p * kFeatDim;
      double dot = 0.0;
      for (int j = 0; j < kFeatDim; ++j) dot += row[j] * prev[j];
      for (int j = 0; j < kFeatDim; ++j) row[j] -= dot * prev[j];
    }
    double norm2 = 0.0;
    for (int j = 0; j < kFeatDim; ++j) norm2 += row[j] * row[j];
    const double inv = 1.0 / std::sqrt(norm2);
    for (int j = 0; j < kFeatDim; ++j) row[j] *= inv;
  }
}

std::vector<double> FeatureExtractor::frame_feature(const Array& video, int frame) const {
  if (video.ndim() != 4) throw ShapeError("features expect [C,M,H,W], got " + video.shape_str());
  const int c = video.extent(0), h = video.extent(2), w = video.extent(3);
  const size_t plane = static_cast<size_t>(h) * w;

  // grayscale (channel mean), then 8x8 box means with integer bin edges
  std::vector<double> cell(kFeatDim, 0.0);
  for (int gy = 0; gy < kGrid; ++gy) {
    const int y0 = gy * h / kGrid, y1 = std::max(y0 + 1, (gy + 1) * h / kGrid);
    for (int gx = 0; gx < kGrid; ++gx) {
      const int x0 = gx * w / kGrid, x1 = std::max(x0 + 1, (gx + 1) * w / kGrid);
      double acc = 0.0;
      for (int y = std::min(y0, h - 1); y < std::min(y1, h); ++y) {
        for (int x = std::min(x0, w - 1); x < std::min(x1, w); ++x) {
          double gray = 0.0;
          for (int ci = 0; ci < c; ++ci) {
            gray += video.data()[ci * video.stride(0) + frame * plane + y * w + x];
          }
          acc += gray / c;
        }
      }
      const int count = (std::min(y1, h) - std::min(y0, h - 1)) *
                        (std::min(x1, w) - std::min(x0, w - 1));
      cell[gy * kGrid + gx] = acc / std::max(count, 1);
    }
  }

  std::vector<double> feat(kFeatDim, 0.0);
  for (int r = 0; r < kFeatDim; ++r) {
    const double* row = projection_.data() + r * kFeatDim;
    double dot = 0.0;
    for (int j = 0; j < kFeatDim; ++j) dot += row[j] * cell[j];
    feat[r] = dot;
  }
  double norm2 = 0.0;
  for (double v : feat) norm2 += v * v;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : feat) v *= inv;
  }
  return feat;
}

std::vector<std::vector<double>> FeatureExtractor::video_features(const Array& video) const {
  std::vector<std::vector<double>> feats;
  feats.reserve(static_cast<size_t>(video.extent(1)));
  for (int f = 0; f < video.extent(1); ++f) feats.push_back(frame_feature(video, f));
  return feats;
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a == b) return 1.0;  // identical vectors: exact by definition
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double consistency_sim(const Array& video, const FeatureExtractor& fx) {
  if (video.ndim() != 4 || video.extent(1) < 2) {
    throw InputError("consistency needs a video with >= 2 frames");
  }
  const auto feats = fx.video_features(video);
  double sum = 0.0;
  for (size_t i = 0; i + 1 < feats.size(); ++i) sum += cosine(feats[i], feats[i + 1]);
  return sum / static_cast<double>(feats.size() - 1);
}

double consistency_sim(const Array& video) {
  static const FeatureExtractor fx;
  return consistency_sim(video, fx);
}

double frechet_feature_distance(const std::vector<Array>& set_a, const std::vector<Array>& set_b,
                                const FeatureExtractor& fx) {
  auto fit = [&fx](const std::vector<Array>& set, std::vector<double>& mu,
                   std::vector<double>& var) {
    if (set.size() < 2) throw InputError("frechet needs >= 2 videos per set");
    std::vector<std::vector<double>> pooled;
    for (const Array& v : set) {
      for (auto& f : fx.video_features(v)) pooled.push_back(std::move(f));
    }
    const double n = static_cast<double>(pooled.size());
    mu.assign(kFeatDim, 0.0);
    var.assign(kFeatDim, 0.0);
    for (const auto& f : pooled) {
      for (int j = 0; j < kFeatDim; ++j) mu[j] += f[j];
    }
    for (int j = 0; j < kFeatDim; ++j) mu[j] /= n;
    for (const auto& f : pooled) {
      for (int j = 0; j < kFeatDim; ++j) {
        const double c = f[j] - mu[j];
        var[j] += c * c;
      }
    }
    for (int j = 0; j < kFeatDim; ++j) var[j] /= n;
  };

  std::vector<double> mu_a, var_a, mu_b, var_b;
  fit(set_a, mu_a, var_a);
  fit(set_b, mu_b, var_b);
  double d2 = 0.0;
  for (int j = 0; j < kFeatDim; ++j) {
    const double dm = mu_a[j] - mu_b[j];
    const double ds = std::sqrt(var_a[j]) - std::sqrt(var_b[j]);
    d2 += dm * dm + ds * ds;
  }
  return d2;
}

double frechet_feature_distance(const std::vector<Array>& set_a, const std::vector<Array>& set_b) {
  static const FeatureExtractor fx;
  return frechet_feature_distance(set_a, set_b, fx);
}

// ============================================================================
// Compute accounting
// ============================================================================

PassCountReport count_model_passes(const SamplerConfig& cfg, const ToyVideoLdm& model) {
  cfg.validate();
  // one-step schedule: the dry run is a single denoising step, both branches
  const DiffusionSchedule sched = make_diffusion_schedule(1000, 1e-4f, 2e-2f, 1, 0.0f);
  PassCounters counters;
  FixedCondition cond(embed_prompt("count", model.config()).tokens);
  sample_video(cfg, cond, model, sched, &counters);
  PassCountReport report;
  report.passes_per_step_per_branch = counters.unet_passes / 2;
  report.pair_ops_per_layer = counters.temporal_attn_invocations > 0
                                  ? counters.temporal_attn_pair_ops /
                                        counters.temporal_attn_invocations
                                  : 0;
  return report;
}

BenchReport run_benchmark(const std::vector<SamplerMode>& modes, SamplerConfig cfg,
                          const ToyVideoLdm& model, const DiffusionSchedule& sched,
                          int repetitions) {
  if (repetitions < 3) {
    throw ConfigError("benchmark needs >= 3 repetitions, got " + std::to_string(repetitions));
  }
  BenchReport report;
  report.repetitions = repetitions;
  report.steps = sched.ddim_steps;
  FixedCondition cond(embed_prompt("benchmark prompt", model.config()).tokens);
  for (SamplerMode mode : modes) {
    cfg.mode = mode;
    cfg.validate();
    PassCounters counters;
    sample_video(cfg, cond, model, sched, &counters);  // warm-up, discarded

    std::vector<double> times;
    for (int rep = 0; rep < repetitions; ++rep) {
      PassCounters rep_counters;
      const auto begin = std::chrono::steady_clock::now();
      sample_video(cfg, cond, model, sched, &rep_counters);
      const auto end = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double>(end - begin).count());
      counters = rep_counters;
    }
    std::sort(times.begin(), times.end());
    const double median = times[times.size() / 2];
    if (median <= 0.0) throw BenchError("timer resolution insufficient for this workload");

    ModeStats stats;
    stats.mode = mode;
    stats.median_seconds = median;
    stats.seconds_per_step = median / sched.ddim_steps;
    stats.passes_per_step_per_branch = counters.unet_passes / (2LL * sched.ddim_steps);
    stats.pair_ops_per_layer =
        counters.temporal_attn_invocations > 0
            ? counters.temporal_attn_pair_ops / counters.temporal_attn_invocations
            : 0;
    stats.peak_frames = counters.peak_frames;
    report.rows.push_back(stats);
  }
  return report;
}

std::string format_report_table(const BenchReport& report) {
  std::ostringstream os;
  os << "mode        median_s   per_step_s  passes/step/branch  pair_ops/layer  peak_frames\n";
  char line[160];
  for (const ModeStats& r : report.rows) {
    std::snprintf(line, sizeof(line), "%-10s %9.3f %12.5f %19lld %15lld %12lld\n",
                  mode_name(r.mode), r.median_seconds, r.seconds_per_step,
                  r.passes_per_step_per_branch, r.pair_ops_per_layer, r.peak_frames);
    os << line;
  }
  os << "(" << report.repetitions << " repetitions, " << report.steps
     << " denoising steps, warm-up discarded)\n";
  return os.str();
}

std::string format_report_key_values(const BenchReport& report) {
  std::ostringstream os;
  os << "repetitions=" << report.repetitions << "\n";
  os << "steps=" << report.steps << "\n";
  for (const ModeStats& r : report.rows) {
    const std::string p = mode_name(r.mode);
    os << p << ".median_seconds=" << r.median_seconds << "\n";
    os << p << ".seconds_per_step=" << r.seconds_per_step << "\n";
    os << p << ".passes_per_step_per_branch=" << r.passes_per_step_per_branch << "\n";
    os << p << ".pair_ops_per_layer=" << r.pair_ops_per_layer << "\n";
    os << p << ".peak_frames=" << r.peak_frames << "\n";
  }
  return os.str();
}

}  // namespace freenoise
