#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freenoise/array.hpp"
#include "freenoise/condition.hpp"
#include "freenoise/counters.hpp"
#include "freenoise/model.hpp"
#include "freenoise/rng.hpp"

namespace freenoise {

// ============================================================================
// Diffusion schedule
// ============================================================================

struct DiffusionSchedule {
  int train_steps = 1000;  // T
  float beta_start = 1e-4f;
  float beta_end = 2e-2f;
  int ddim_steps = 50;
  float eta = 0.0f;
  std::vector<float> betas;       // strictly increasing, in (0,1)
  std::vector<float> alphas;      // 1 - beta
  std::vector<float> alpha_bars;  // prefix products, strictly decreasing
  std::vector<int> ddim_indices;  // ascending; the sampler walks them backwards
};

DiffusionSchedule make_diffusion_schedule(int train_steps = 1000, float beta_start = 1e-4f,
                                          float beta_end = 2e-2f, int ddim_steps = 50,
                                          float eta = 0.0f);

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Array q_sample(const Array& x0, int t, const Array& eps, const DiffusionSchedule& sched);

/// One deterministic DDIM transition t -> t_prev (t > t_prev >= 0). With
/// eta > 0 the stochastic term is added from `rng`.
Array ddim_step(const Array& x_t, const Array& eps_hat, int t, int t_prev,
                const DiffusionSchedule& sched, Rng* rng = nullptr);

/// Predicted x0 = (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t); the final
/// transition of the sampling loop.
Array predict_x0(const Array& x_t, const Array& eps_hat, int t, const DiffusionSchedule& sched);

/// eps_uncond + scale * (eps_cond - eps_uncond); scale 0 and 1 short-circuit
/// to the exact operands.
Array cfg_combine(const Array& eps_uncond, const Array& eps_cond, float scale);

// ============================================================================
// Inference modes
// ============================================================================

enum class SamplerMode { Direct, Sliding, GenL, FreeNoise };

const char* mode_name(SamplerMode mode);
SamplerMode mode_from_name(const std::string& name);

/// RNG stream ids per consumer; adding one must not shift the others.
inline constexpr uint64_t kNoiseStream = 0x66726565;  // initial-noise draws

struct SamplerConfig {
  SamplerMode mode = SamplerMode::FreeNoise;
  int n_train = 16;  // frames the model is "trained" on; window size U
  int total = 64;    // M frames to generate
  int unit = 4;      // noise shuffle unit == sliding-window stride
  float guidance = 15.0f;
  uint64_t seed = 0;
  int genl_stride = 0;  // 0 -> use `unit`
  int latent_height = 8;
  int latent_width = 8;
  bool sliding_disjoint = false;  // Sliding variant with non-overlapping windows

  int effective_genl_stride() const { return genl_stride > 0 ? genl_stride : unit; }
  void validate() const;  // throws ConfigError naming the violated constraint
};

/// Initial latent noise for the configured mode: i.i.d. frames for
/// Direct/Sliding/GenL, the rescheduled shuffled sequence for FreeNoise.
/// Both draw from stream (seed, kNoiseStream), so they agree bitwise when
/// total == n_train.
Array make_initial_noise(const SamplerConfig& cfg, int channels);

/// Full classifier-free-guided DDIM loop from the given starting noise.
Array sample_from_noise(Array x, const SamplerConfig& cfg, ConditionSource& cond,
                        const ToyVideoLdm& model, const DiffusionSchedule& sched,
                        PassCounters* counters = nullptr);

/// make_initial_noise + sample_from_noise.
Array sample_video(const SamplerConfig& cfg, ConditionSource& cond, const ToyVideoLdm& model,
                   const DiffusionSchedule& sched, PassCounters* counters = nullptr);

/// One noise prediction for the GenL mode: every overlapping `window`-frame
/// segment (stride `stride`) runs a full forward pass and per-frame
/// predictions are averaged uniformly over the covering segments.
Array genl_predict(const Array& x, int t, ConditionSource& cond, const ToyVideoLdm& model,
                   int window, int stride, PassCounters* counters = nullptr);

}  // namespace freenoise
