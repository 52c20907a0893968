#pragma once

#include <mutex>
#include <string>
#include <vector>

#include "freenoise/condition.hpp"
#include "freenoise/model.hpp"

namespace freenoise {

/// One prompt change: segments meet at `breakpoint`, embeddings blend
/// linearly over frames [n_gamma, n_tau).
struct Transition {
  int breakpoint = 0;
  int n_gamma = 0;
  int n_tau = 0;
};

/// Per-frame conditioning program for a multi-prompt run. Cross-attention
/// layers with index > layer_threshold always receive the per-frame target
/// embedding; other layers receive it only for timesteps strictly inside
/// (t_alpha, t_beta) and otherwise fall back to the first prompt of the
/// active segment pair.
struct PromptTimeline {
  std::vector<PromptEmbedding> prompts;
  std::vector<Transition> transitions;  // prompts.size() - 1, ascending
  int total_frames = 0;
  int t_alpha = 300;
  int t_beta = 700;
  int layer_threshold = 1;
};

/// Linear embedding blend: n < n_gamma -> p1; n >= n_tau -> p2; otherwise
/// p1 + ((n - n_gamma)/(n_tau - n_gamma)) (p2 - p1). Boundaries are exact.
PromptEmbedding interpolate_prompt(const PromptEmbedding& p1, const PromptEmbedding& p2, int n,
                                   int n_gamma, int n_tau);

struct RoutingEntry {
  int t = 0;
  int layer = 0;
  int frame = 0;
  bool target = false;  // true -> per-frame target embedding, false -> segment base prompt
};

/// ConditionSource that implements the timestep/layer gate and records every
/// routing decision. One resolver per sampling run; concurrent resolve()
/// calls are serialized internally, so log order is only deterministic in
/// serial mode (replay checks are order-independent).
class ConditionResolver final : public ConditionSource {
 public:
  explicit ConditionResolver(PromptTimeline timeline);

  const Array& resolve(int t, int layer, int frame) override;

  const PromptTimeline& timeline() const { return timeline_; }
  const std::vector<RoutingEntry>& log() const { return log_; }
  void clear_log() { log_.clear(); }

  /// Embeddings the gate chooses between, precomputed per frame.
  const Array& target_embedding(int frame) const;
  const Array& base_embedding(int frame) const;

 private:
  PromptTimeline timeline_;
  std::vector<Array> target_;  // per-frame blended embedding
  std::vector<Array> base_;    // per-frame first-of-pair embedding
  std::vector<RoutingEntry> log_;
  std::mutex mu_;
};

/// Builds a timeline from prompt strings. segment_frames[i] is the length of
/// prompt i's segment and must sum to the video length; each transition is
/// centered on its breakpoint with width transition_len. t_alpha/t_beta are
/// fractions of train_steps; layer_threshold < 0 picks the model default
/// (the last non-decoder cross-attention layer).
PromptTimeline build_timeline(const std::vector<std::string>& prompts,
                              const std::vector<int>& segment_frames, int transition_len,
                              double t_alpha_frac, double t_beta_frac, int layer_threshold,
                              int train_steps, const ModelConfig& model_cfg);

}  // namespace freenoise
