#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freenoise/array.hpp"
#include "freenoise/condition.hpp"
#include "freenoise/counters.hpp"
#include "freenoise/window.hpp"

namespace freenoise {

// ============================================================================
// Configuration and weights
// ============================================================================

struct ModelConfig {
  int latent_channels = 12;
  int hidden_channels = 32;
  int num_blocks = 1;  // video blocks per level
  int levels = 2;      // 2 = one down level, middle, one up level
  int heads = 2;
  int head_dim = 16;
  int text_dim = 32;
  int text_tokens = 8;
  int time_dim = 32;
  uint64_t weight_seed = 1;
  bool temporal_conv = true;  // false turns the temporal conv blocks into identity

  int attention_width() const { return heads * head_dim; }
  void validate() const;  // throws ConfigError
};

struct Param {
  std::string name;
  Array value;
};

/// All learnable tensors in declared order. Values are reproducible from
/// (config, weight_seed): parameter p draws from stream (weight_seed, p)
/// with fan-in-scaled normal init; biases start at zero, norm gains at one.
class ModelWeights {
 public:
  static ModelWeights init(const ModelConfig& cfg);

  const Array& get(const std::string& name) const;
  Array& get(const std::string& name);
  const std::vector<Param>& params() const { return params_; }
  std::vector<Param>& params() { return params_; }

  size_t total_floats() const;
  void zero_all();

 private:
  friend class ToyVideoLdm;
  std::vector<Param> params_;
};

// ============================================================================
// Prompt and timestep conditioning
// ============================================================================

struct PromptEmbedding {
  Array tokens;  // [text_tokens, text_dim]
};

/// Deterministic pseudo text encoder: whitespace tokens, each embedded from a
/// hash of (token, position); padded/truncated to cfg.text_tokens rows.
/// Throws InputError when the prompt has no tokens.
PromptEmbedding embed_prompt(const std::string& text, const ModelConfig& cfg);

/// All-zero tokens; the unconditional branch of classifier-free guidance.
PromptEmbedding empty_prompt_embedding(const ModelConfig& cfg);

// ============================================================================
// Attention scope
// ============================================================================

/// Temporal self-attention scope: all frames at once, or per overlapping
/// window with center-distance weighted fusion of the window outputs.
struct AttentionMode {
  static AttentionMode global() { return {}; }
  static AttentionMode windowed(WindowPlan plan) {
    AttentionMode m;
    m.global_scope = false;
    m.plan = std::move(plan);
    return m;
  }

  bool global_scope = true;
  WindowPlan plan;
};

// ============================================================================
// Model
// ============================================================================

/// Small seeded noise-prediction U-Net over video latents [C,M,H,W]: per
/// level a (spatial res-conv, temporal conv, spatial transformer, temporal
/// transformer) stack, downsample to a middle level, upsample with skip
/// merge. Temporal attention carries no positional encoding, so reordering
/// frames reorders outputs; temporal convolution is the only order-dependent
/// cross-frame operation.
class ToyVideoLdm {
 public:
  explicit ToyVideoLdm(ModelConfig cfg);
  ToyVideoLdm(ModelConfig cfg, ModelWeights weights);

  const ModelConfig& config() const { return cfg_; }
  const ModelWeights& weights() const { return weights_; }
  ModelWeights& weights() { return weights_; }

  int num_video_blocks() const;
  int num_cross_attention_layers() const { return num_video_blocks(); }
  /// Highest cross-attention layer index that is not part of the up path;
  /// "decoder layers" are the indices above this.
  int last_encoder_cross_layer() const;

  /// eps_hat for z[C,M,H,W] at timestep t. Throws ModelError if the output
  /// is not finite.
  Array predict_noise(const Array& z, int t, ConditionSource& cond, const AttentionMode& mode,
                      PassCounters* counters = nullptr) const;

  /// Residual conv block (timestep-conditioned) followed by the spatial
  /// transformer of video block `block`; frame-wise, no cross-frame flow.
  Array spatial_block(int block, const Array& h, int t, ConditionSource& cond) const;

  /// Temporal conv block followed by the temporal transformer of video
  /// block `block`.
  Array temporal_block(int block, const Array& h, const AttentionMode& mode,
                       PassCounters* counters = nullptr) const;

  /// Sinusoidal features of t through the shared 2-layer MLP; [1, time_dim].
  Array timestep_embedding(int t) const;

 private:
  Array res_conv_block(int block, const Array& h, const Array& temb) const;
  Array temporal_conv_block(int block, const Array& h) const;
  Array spatial_transformer(int block, const Array& h, int t, int layer,
                            ConditionSource& cond) const;
  Array temporal_transformer(int block, const Array& h, const AttentionMode& mode,
                             PassCounters* counters) const;
  Array video_block(int block, const Array& h, const Array& temb, int t, int layer,
                    ConditionSource& cond, const AttentionMode& mode,
                    PassCounters* counters) const;

  ModelConfig cfg_;
  ModelWeights weights_;
};

// ============================================================================
// Latent codec (exactly invertible space-to-depth)
// ============================================================================

/// [3,H,W] -> [12,H/2,W/2]; H and W must be even.
Array encode_image(const Array& rgb);
/// [12,H,W] -> [3,2H,2W]; exact inverse of encode_image.
Array decode_image(const Array& latent);
/// Per-frame codec over [3,M,H,W] / [12,M,H,W] videos.
Array encode_video(const Array& rgb);
Array decode_video(const Array& latent);

// ============================================================================
// Weight file format: "FNW1", config header, float32 blob in declared order
// ============================================================================

void save_weights(const ToyVideoLdm& model, const std::string& path);
ToyVideoLdm load_weights(const std::string& path);

}  // namespace freenoise
