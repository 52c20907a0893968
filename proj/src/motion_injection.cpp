#include "freenoise/motion_injection.hpp"

#include <cmath>

namespace freenoise {

PromptEmbedding interpolate_prompt(const PromptEmbedding& p1, const PromptEmbedding& p2, int n,
                                   int n_gamma, int n_tau) {
  if (n_gamma >= n_tau) {
    throw ConfigError("transition band requires n_gamma < n_tau, got [" +
                      std::to_string(n_gamma) + ", " + std::to_string(n_tau) + ")");
  }
  if (!p1.tokens.same_shape(p2.tokens)) {
    throw ShapeError("prompt embeddings differ in shape: " + p1.tokens.shape_str() + " vs " +
                     p2.tokens.shape_str());
  }
  if (n < n_gamma) return p1;
  if (n >= n_tau) return p2;
  const float coef = static_cast<float>(n - n_gamma) / static_cast<float>(n_tau - n_gamma);
  if (coef == 0.0f) return p1;  // band start is exact
  PromptEmbedding out = p1;
  for (size_t i = 0; i < out.tokens.size(); ++i) {
    out.tokens.data()[i] =
        p1.tokens.data()[i] + coef * (p2.tokens.data()[i] - p1.tokens.data()[i]);
  }
  return out;
}

ConditionResolver::ConditionResolver(PromptTimeline timeline) : timeline_(std::move(timeline)) {
  if (timeline_.prompts.empty()) throw ConfigError("timeline needs at least one prompt");
  if (timeline_.transitions.size() + 1 != timeline_.prompts.size()) {
    throw ConfigError("timeline has " + std::to_string(timeline_.prompts.size()) +
                      " prompts but " + std::to_string(timeline_.transitions.size()) +
                      " transitions");
  }
  const int m = timeline_.total_frames;
  if (m < 1) throw ConfigError("timeline total_frames must be >= 1");
  target_.reserve(static_cast<size_t>(m));
  base_.reserve(static_cast<size_t>(m));
  for (int n = 0; n < m; ++n) {
    size_t completed = 0;
    int active = -1;
    for (size_t k = 0; k < timeline_.transitions.size(); ++k) {
      const Transition& tr = timeline_.transitions[k];
      if (n >= tr.n_tau) completed = k + 1;
      if (n >= tr.n_gamma && n < tr.n_tau) active = static_cast<int>(k);
    }
    base_.push_back(timeline_.prompts[completed].tokens);
    if (active >= 0) {
      const size_t k = static_cast<size_t>(active);
      target_.push_back(interpolate_prompt(timeline_.prompts[k], timeline_.prompts[k + 1], n,
                                           timeline_.transitions[k].n_gamma,
                                           timeline_.transitions[k].n_tau)
                            .tokens);
    } else {
      target_.push_back(timeline_.prompts[completed].tokens);
    }
  }
}

const Array& ConditionResolver::resolve(int t, int layer, int frame) {
  const bool use_target = (timeline_.t_alpha < t && t < timeline_.t_beta) ||
                          (layer > timeline_.layer_threshold);
  {
    std::lock_guard<std::mutex> lock(mu_);
    log_.push_back({t, layer, frame, use_target});
  }
  return use_target ? target_[static_cast<size_t>(frame)] : base_[static_cast<size_t>(frame)];
}

const Array& ConditionResolver::target_embedding(int frame) const {
  return target_[static_cast<size_t>(frame)];
}

const Array& ConditionResolver::base_embedding(int frame) const {
  return base_[static_cast<size_t>(frame)];
}

PromptTimeline build_timeline(const std::vector<std::string>& prompts,
                              const std::vector<int>& segment_frames, int transition_len,
                              double t_alpha_frac, double t_beta_frac, int layer_threshold,
                              int train_steps, const ModelConfig& model_cfg) {
  if (prompts.empty()) throw ConfigError("need at least one prompt");
  if (prompts.size() != segment_frames.size()) {
    throw ConfigError("got " + std::to_string(prompts.size()) + " prompts but " +
                      std::to_string(segment_frames.size()) + " segment lengths");
  }
  if (transition_len < 1) {
    throw ConfigError("transition_len must be >= 1, got " + std::to_string(transition_len));
  }
  if (!(0.0 <= t_alpha_frac && t_alpha_frac < t_beta_frac && t_beta_frac <= 1.0)) {
    throw ConfigError("inject band must satisfy 0 <= t_alpha < t_beta <= 1");
  }

  PromptTimeline tl;
  tl.t_alpha = static_cast<int>(std::llround(t_alpha_frac * train_steps));
  tl.t_beta = static_cast<int>(std::llround(t_beta_frac * train_steps));
  // default: the last cross-attention layer before the up path
  tl.layer_threshold =
      layer_threshold >= 0 ? layer_threshold : model_cfg.levels * model_cfg.num_blocks - 1;
  for (const std::string& p : prompts) tl.prompts.push_back(embed_prompt(p, model_cfg));

  int frame = 0;
  std::vector<int> starts;
  for (int len : segment_frames) {
    if (len < 1) throw ConfigError("segment lengths must be >= 1");
    starts.push_back(frame);
    frame += len;
  }
  tl.total_frames = frame;

  for (size_t k = 1; k < starts.size(); ++k) {
    Transition tr;
    tr.breakpoint = starts[k];
    tr.n_gamma = tr.breakpoint - transition_len / 2;
    tr.n_tau = tr.breakpoint + (transition_len - transition_len / 2);
    const int left_start = starts[k - 1];
    const int right_end = (k + 1 < starts.size()) ? starts[k + 1] : tl.total_frames;
    if (tr.n_gamma < left_start || tr.n_tau > right_end) {
      throw ConfigError("transition at frame " + std::to_string(tr.breakpoint) +
                        " does not fit inside its segments");
    }
    if (!tl.transitions.empty() && tr.n_gamma < tl.transitions.back().n_tau) {
      throw ConfigError("transitions around frames " +
                        std::to_string(tl.transitions.back().breakpoint) + " and " +
                        std::to_string(tr.breakpoint) + " overlap");
    }
    tl.transitions.push_back(tr);
  }
  return tl;
}

}  // namespace freenoise
