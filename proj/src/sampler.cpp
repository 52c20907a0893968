#include "freenoise/sampler.hpp"

#include <cmath>
#include <cstring>

#include "freenoise/kernels.hpp"
#include "freenoise/noise_schedule.hpp"
#include "freenoise/window.hpp"

namespace freenoise {

// ============================================================================
// Schedule
// ============================================================================

DiffusionSchedule make_diffusion_schedule(int train_steps, float beta_start, float beta_end,
                                          int ddim_steps, float eta) {
  if (train_steps < 2) {
    throw ConfigError("train_steps must be >= 2, got " + std::to_string(train_steps));
  }
  if (!(0.0f < beta_start && beta_start < beta_end && beta_end < 1.0f)) {
    throw ConfigError("betas must satisfy 0 < beta_start < beta_end < 1");
  }
  if (ddim_steps < 1 || ddim_steps > train_steps) {
    throw ConfigError("ddim_steps must be in [1, train_steps], got " + std::to_string(ddim_steps));
  }
  if (eta < 0.0f) throw ConfigError("eta must be >= 0");

  DiffusionSchedule s;
  s.train_steps = train_steps;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.ddim_steps = ddim_steps;
  s.eta = eta;
  s.betas.resize(static_cast<size_t>(train_steps));
  s.alphas.resize(static_cast<size_t>(train_steps));
  s.alpha_bars.resize(static_cast<size_t>(train_steps));
  float bar = 1.0f;
  for (int t = 0; t < train_steps; ++t) {
    const float frac = static_cast<float>(t) / static_cast<float>(train_steps - 1);
    s.betas[t] = beta_start + (beta_end - beta_start) * frac;
    s.alphas[t] = 1.0f - s.betas[t];
    bar *= s.alphas[t];
    s.alpha_bars[t] = bar;
  }
  const int ratio = train_steps / ddim_steps;
  s.ddim_indices.resize(static_cast<size_t>(ddim_steps));
  for (int i = 0; i < ddim_steps; ++i) s.ddim_indices[i] = i * ratio;
  return s;
}

namespace {

void check_timestep(int t, const DiffusionSchedule& sched, const char* who) {
  if (t < 0 || t >= sched.train_steps) {
    throw IndexError(std::string(who) + ": timestep " + std::to_string(t) +
                     " outside [0, " + std::to_string(sched.train_steps) + ")");
  }
}

}  // namespace

Array q_sample(const Array& x0, int t, const Array& eps, const DiffusionSchedule& sched) {
  check_timestep(t, sched, "q_sample");
  if (!x0.same_shape(eps)) {
    throw ShapeError("q_sample shape mismatch: " + x0.shape_str() + " vs " + eps.shape_str());
  }
  const float abar = sched.alpha_bars[static_cast<size_t>(t)];
  const float ca = std::sqrt(abar);
  const float cb = std::sqrt(1.0f - abar);
  Array out = x0;
  for (size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = ca * x0.data()[i] + cb * eps.data()[i];
  }
  return out;
}

Array ddim_step(const Array& x_t, const Array& eps_hat, int t, int t_prev,
                const DiffusionSchedule& sched, Rng* rng) {
  check_timestep(t, sched, "ddim_step");
  if (t_prev < 0 || t_prev >= t) {
    throw IndexError("ddim_step requires t > t_prev >= 0, got t=" + std::to_string(t) +
                     " t_prev=" + std::to_string(t_prev));
  }
  if (!x_t.same_shape(eps_hat)) {
    throw ShapeError("ddim_step shape mismatch: " + x_t.shape_str() + " vs " + eps_hat.shape_str());
  }
  const float abar_t = sched.alpha_bars[static_cast<size_t>(t)];
  const float abar_p = sched.alpha_bars[static_cast<size_t>(t_prev)];
  const float inv_sqrt_abar_t = 1.0f / std::sqrt(abar_t);
  const float sqrt_one_minus_t = std::sqrt(1.0f - abar_t);
  const float sqrt_abar_p = std::sqrt(abar_p);

  float sigma = 0.0f;
  if (sched.eta > 0.0f) {
    sigma = sched.eta * std::sqrt((1.0f - abar_p) / (1.0f - abar_t)) *
            std::sqrt(1.0f - abar_t / abar_p);
    if (!rng) throw ConfigError("ddim_step with eta > 0 needs an rng");
  }
  const float dir = std::sqrt(1.0f - abar_p - sigma * sigma);

  Array out = x_t;
  for (size_t i = 0; i < out.size(); ++i) {
    const float x0 = (x_t.data()[i] - sqrt_one_minus_t * eps_hat.data()[i]) * inv_sqrt_abar_t;
    out.data()[i] = sqrt_abar_p * x0 + dir * eps_hat.data()[i];
  }
  if (sigma > 0.0f) {
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] += sigma * rng->next_normal();
  }
  return out;
}

Array predict_x0(const Array& x_t, const Array& eps_hat, int t, const DiffusionSchedule& sched) {
  check_timestep(t, sched, "predict_x0");
  if (!x_t.same_shape(eps_hat)) {
    throw ShapeError("predict_x0 shape mismatch: " + x_t.shape_str() + " vs " +
                     eps_hat.shape_str());
  }
  const float abar = sched.alpha_bars[static_cast<size_t>(t)];
  const float inv_sqrt = 1.0f / std::sqrt(abar);
  const float c = std::sqrt(1.0f - abar);
  Array out = x_t;
  for (size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = (x_t.data()[i] - c * eps_hat.data()[i]) * inv_sqrt;
  }
  return out;
}

Array cfg_combine(const Array& eps_uncond, const Array& eps_cond, float scale) {
  if (!eps_uncond.same_shape(eps_cond)) {
    throw ShapeError("cfg_combine shape mismatch: " + eps_uncond.shape_str() + " vs " +
                     eps_cond.shape_str());
  }
  if (scale == 0.0f) return eps_uncond;
  if (scale == 1.0f) return eps_cond;
  Array out = eps_uncond;
  for (size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = eps_uncond.data()[i] + scale * (eps_cond.data()[i] - eps_uncond.data()[i]);
  }
  return out;
}

// ============================================================================
// Modes
// ============================================================================

const char* mode_name(SamplerMode mode) {
  switch (mode) {
    case SamplerMode::Direct: return "direct";
    case SamplerMode::Sliding: return "sliding";
    case SamplerMode::GenL: return "genl";
    case SamplerMode::FreeNoise: return "freenoise";
  }
  return "?";
}

SamplerMode mode_from_name(const std::string& name) {
  if (name == "direct") return SamplerMode::Direct;
  if (name == "sliding") return SamplerMode::Sliding;
  if (name == "genl") return SamplerMode::GenL;
  if (name == "freenoise") return SamplerMode::FreeNoise;
  throw ConfigError("unknown mode '" + name + "' (direct|sliding|genl|freenoise)");
}

void SamplerConfig::validate() const {
  if (n_train < 1) throw ConfigError("n_train must be >= 1, got " + std::to_string(n_train));
  if (total < 1) throw ConfigError("frames must be >= 1, got " + std::to_string(total));
  if (latent_height < 1 || latent_width < 1) {
    throw ConfigError("latent extents must be >= 1");
  }
  if (mode == SamplerMode::Direct) return;
  // windowed and segment modes run the attention/segments at train length
  if (total < n_train) {
    throw ConfigError("frames (" + std::to_string(total) + ") must be >= n_train (" +
                      std::to_string(n_train) + ") in " + mode_name(mode) + " mode");
  }
  if (unit < 1 || n_train % unit != 0) {
    throw ConfigError("unit (" + std::to_string(unit) + ") must divide n_train (" +
                      std::to_string(n_train) + ")");
  }
  const int stride = (mode == SamplerMode::GenL) ? effective_genl_stride()
                     : (mode == SamplerMode::Sliding && sliding_disjoint) ? n_train
                                                                          : unit;
  if (stride < 1 || (total - n_train) % stride != 0) {
    throw ConfigError("(frames - n_train) must be a multiple of the stride: (" +
                      std::to_string(total) + " - " + std::to_string(n_train) + ") % " +
                      std::to_string(stride) + " != 0");
  }
}

Array make_initial_noise(const SamplerConfig& cfg, int channels) {
  cfg.validate();
  if (cfg.mode == SamplerMode::FreeNoise) {
    const ShufflePlan plan = build_shuffle_plan(cfg.n_train, cfg.unit, cfg.total, cfg.seed);
    const BaseNoise base =
        make_base_noise(channels, cfg.n_train, cfg.latent_height, cfg.latent_width, cfg.seed,
                        kNoiseStream);
    return materialize_noise(plan, base);
  }
  Rng rng(cfg.seed, kNoiseStream);
  return rng.normal({channels, cfg.total, cfg.latent_height, cfg.latent_width});
}

Array genl_predict(const Array& x, int t, ConditionSource& cond, const ToyVideoLdm& model,
                   int window, int stride, PassCounters* counters) {
  const int m = x.extent(1);
  if (window > m || stride < 1 || (m - window) % stride != 0) {
    throw ConfigError("genl segments misaligned: (" + std::to_string(m) + " - " +
                      std::to_string(window) + ") % " + std::to_string(stride) + " != 0");
  }
  Array sum({x.extent(0), m, x.extent(2), x.extent(3)});
  std::vector<int> cover(static_cast<size_t>(m), 0);
  const size_t plane = static_cast<size_t>(x.extent(2)) * x.extent(3);
  const AttentionMode global = AttentionMode::global();

  int copied_until = 0;  // frames below this already hold a first prediction
  for (int start = 0; start + window <= m; start += stride) {
    if (counters) counters->acquire_frames(window);
    const Array seg = slice_frames(x, start, start + window);
    OffsetCondition shifted(cond, start);
    const Array eps_seg = model.predict_noise(seg, t, shifted, global, counters);
    for (int ci = 0; ci < x.extent(0); ++ci) {
      const float* src = eps_seg.data() + ci * eps_seg.stride(0);
      float* dst = sum.data() + ci * sum.stride(0);
      for (int f = 0; f < window; ++f) {
        const int g = start + f;
        if (g >= copied_until) {
          std::memcpy(dst + g * plane, src + f * plane, plane * sizeof(float));
        } else {
          kernels::active().vadd(dst + g * plane, src + f * plane, static_cast<int>(plane));
        }
      }
    }
    for (int f = start; f < start + window; ++f) ++cover[static_cast<size_t>(f)];
    copied_until = start + window;
    if (counters) counters->release_frames(window);
  }
  for (int f = 0; f < m; ++f) {
    const float d = static_cast<float>(cover[static_cast<size_t>(f)]);
    for (int ci = 0; ci < x.extent(0); ++ci) {
      kernels::active().vdiv(sum.data() + ci * sum.stride(0) + f * plane, d,
                             static_cast<int>(plane));
    }
  }
  return sum;
}

Array sample_from_noise(Array x, const SamplerConfig& cfg, ConditionSource& cond,
                        const ToyVideoLdm& model, const DiffusionSchedule& sched,
                        PassCounters* counters) {
  cfg.validate();
  if (x.ndim() != 4 || x.extent(1) != cfg.total) {
    throw ShapeError("initial noise must have " + std::to_string(cfg.total) + " frames, got " +
                     x.shape_str());
  }

  AttentionMode amode = AttentionMode::global();
  if (cfg.mode == SamplerMode::Sliding || cfg.mode == SamplerMode::FreeNoise) {
    const int stride =
        (cfg.mode == SamplerMode::Sliding && cfg.sliding_disjoint) ? cfg.n_train : cfg.unit;
    amode = AttentionMode::windowed(plan_windows(cfg.total, cfg.n_train, stride));
  }

  FixedCondition uncond(empty_prompt_embedding(model.config()).tokens);
  if (counters) counters->acquire_frames(2LL * cfg.total);  // latent state + eps

  const auto& idx = sched.ddim_indices;
  for (int k = static_cast<int>(idx.size()) - 1; k >= 0; --k) {
    const int t = idx[static_cast<size_t>(k)];
    Array eps_u, eps_c;
    if (cfg.mode == SamplerMode::GenL) {
      eps_u = genl_predict(x, t, uncond, model, cfg.n_train, cfg.effective_genl_stride(), counters);
      eps_c = genl_predict(x, t, cond, model, cfg.n_train, cfg.effective_genl_stride(), counters);
    } else {
      eps_u = model.predict_noise(x, t, uncond, amode, counters);
      eps_c = model.predict_noise(x, t, cond, amode, counters);
    }
    const Array eps = cfg_combine(eps_u, eps_c, cfg.guidance);
    x = (k > 0) ? ddim_step(x, eps, t, idx[static_cast<size_t>(k - 1)], sched)
                : predict_x0(x, eps, t, sched);
  }

  if (counters) counters->release_frames(2LL * cfg.total);
  return x;
}

Array sample_video(const SamplerConfig& cfg, ConditionSource& cond, const ToyVideoLdm& model,
                   const DiffusionSchedule& sched, PassCounters* counters) {
  Array x = make_initial_noise(cfg, model.config().latent_channels);
  return sample_from_noise(std::move(x), cfg, cond, model, sched, counters);
}

}  // namespace freenoise
