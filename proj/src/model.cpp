#include "freenoise/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binio.hpp"
#include "freenoise/kernels.hpp"
#include "freenoise/parallel.hpp"
#include "freenoise/rng.hpp"

namespace freenoise {

namespace {

constexpr float kResidualGain = 0.2f;  // keeps untrained activations bounded

// ============================================================================
// Parameter declaration
// ============================================================================

enum class ParamKind { Weight, Bias, Gain };

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  ParamKind kind;
  int fan_in;  // only meaningful for Weight
};

void declare_attn(std::vector<ParamSpec>& out, const std::string& prefix, int width, int kv_dim) {
  out.push_back({prefix + ".wq", {width, width}, ParamKind::Weight, width});
  out.push_back({prefix + ".bq", {width}, ParamKind::Bias, 0});
  out.push_back({prefix + ".wk", {kv_dim, width}, ParamKind::Weight, kv_dim});
  out.push_back({prefix + ".bk", {width}, ParamKind::Bias, 0});
  out.push_back({prefix + ".wv", {kv_dim, width}, ParamKind::Weight, kv_dim});
  out.push_back({prefix + ".bv", {width}, ParamKind::Bias, 0});
  out.push_back({prefix + ".wo", {width, width}, ParamKind::Weight, width});
  out.push_back({prefix + ".bo", {width}, ParamKind::Bias, 0});
}

void declare_norm(std::vector<ParamSpec>& out, const std::string& prefix, int dim) {
  out.push_back({prefix + ".gain", {dim}, ParamKind::Gain, 0});
  out.push_back({prefix + ".bias", {dim}, ParamKind::Bias, 0});
}

void declare_mlp(std::vector<ParamSpec>& out, const std::string& prefix, int width) {
  out.push_back({prefix + ".w1", {width, 2 * width}, ParamKind::Weight, width});
  out.push_back({prefix + ".b1", {2 * width}, ParamKind::Bias, 0});
  out.push_back({prefix + ".w2", {2 * width, width}, ParamKind::Weight, 2 * width});
  out.push_back({prefix + ".b2", {width}, ParamKind::Bias, 0});
}

int video_block_count(const ModelConfig& cfg) {
  return (2 * (cfg.levels - 1) + 1) * cfg.num_blocks;
}

std::vector<ParamSpec> declare_params(const ModelConfig& cfg) {
  const int c = cfg.hidden_channels;
  const int w = cfg.attention_width();
  std::vector<ParamSpec> specs;

  specs.push_back({"conv_in.w", {c, cfg.latent_channels, 1, 1}, ParamKind::Weight,
                   cfg.latent_channels});
  specs.push_back({"conv_in.b", {c}, ParamKind::Bias, 0});

  specs.push_back({"time.w1", {cfg.time_dim, cfg.time_dim}, ParamKind::Weight, cfg.time_dim});
  specs.push_back({"time.b1", {cfg.time_dim}, ParamKind::Bias, 0});
  specs.push_back({"time.w2", {cfg.time_dim, cfg.time_dim}, ParamKind::Weight, cfg.time_dim});
  specs.push_back({"time.b2", {cfg.time_dim}, ParamKind::Bias, 0});

  for (int b = 0; b < video_block_count(cfg); ++b) {
    const std::string p = "block" + std::to_string(b);
    declare_norm(specs, p + ".res.norm1", c);
    specs.push_back({p + ".res.conv1.w", {c, c, 3, 3}, ParamKind::Weight, c * 9});
    specs.push_back({p + ".res.conv1.b", {c}, ParamKind::Bias, 0});
    specs.push_back({p + ".res.time.w", {cfg.time_dim, c}, ParamKind::Weight, cfg.time_dim});
    specs.push_back({p + ".res.time.b", {c}, ParamKind::Bias, 0});
    declare_norm(specs, p + ".res.norm2", c);
    specs.push_back({p + ".res.conv2.w", {c, c, 3, 3}, ParamKind::Weight, c * 9});
    specs.push_back({p + ".res.conv2.b", {c}, ParamKind::Bias, 0});

    declare_norm(specs, p + ".tconv.norm", c);
    specs.push_back({p + ".tconv.w", {c, c, 3}, ParamKind::Weight, c * 3});
    specs.push_back({p + ".tconv.b", {c}, ParamKind::Bias, 0});

    specs.push_back({p + ".st.proj_in.w", {c, w}, ParamKind::Weight, c});
    specs.push_back({p + ".st.proj_in.b", {w}, ParamKind::Bias, 0});
    declare_norm(specs, p + ".st.ln1", w);
    declare_attn(specs, p + ".st.self", w, w);
    declare_norm(specs, p + ".st.ln2", w);
    declare_attn(specs, p + ".st.cross", w, cfg.text_dim);
    declare_norm(specs, p + ".st.ln3", w);
    declare_mlp(specs, p + ".st.mlp", w);
    specs.push_back({p + ".st.proj_out.w", {w, c}, ParamKind::Weight, w});
    specs.push_back({p + ".st.proj_out.b", {c}, ParamKind::Bias, 0});

    specs.push_back({p + ".tt.proj_in.w", {c, w}, ParamKind::Weight, c});
    specs.push_back({p + ".tt.proj_in.b", {w}, ParamKind::Bias, 0});
    declare_norm(specs, p + ".tt.ln1", w);
    declare_attn(specs, p + ".tt.attn1", w, w);
    declare_norm(specs, p + ".tt.ln2", w);
    declare_attn(specs, p + ".tt.attn2", w, w);
    declare_norm(specs, p + ".tt.ln3", w);
    declare_mlp(specs, p + ".tt.mlp", w);
    specs.push_back({p + ".tt.proj_out.w", {w, c}, ParamKind::Weight, w});
    specs.push_back({p + ".tt.proj_out.b", {c}, ParamKind::Bias, 0});
  }

  for (int l = 0; l < cfg.levels - 1; ++l) {
    const std::string p = "skip" + std::to_string(l);
    specs.push_back({p + ".w", {c, 2 * c, 1, 1}, ParamKind::Weight, 2 * c});
    specs.push_back({p + ".b", {c}, ParamKind::Bias, 0});
  }

  declare_norm(specs, "out.norm", c);
  specs.push_back({"out.w", {cfg.latent_channels, c, 1, 1}, ParamKind::Weight, c});
  specs.push_back({"out.b", {cfg.latent_channels}, ParamKind::Bias, 0});
  return specs;
}

// ============================================================================
// Small helpers
// ============================================================================

void add_channel_bias(Array& x, const float* bias) {
  const int c = x.extent(0);
  const size_t per_channel = x.stride(0);
  for (int ci = 0; ci < c; ++ci) {
    float* d = x.data() + ci * per_channel;
    const float b = bias[ci];
    for (size_t i = 0; i < per_channel; ++i) d[i] += b;
  }
}

Array add_scaled(const Array& base, const Array& delta, float gain) {
  Array out = base;
  kernels::active().axpy(out.data(), delta.data(), gain, static_cast<int>(out.size()));
  return out;
}

/// Row-wise softmax on a raw [rows, cols] buffer, max-subtracted, summed in
/// ascending column order.
void softmax_rows(float* s, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    float* row = s + static_cast<size_t>(r) * cols;
    float mx = row[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    float sum = 0.0f;
    for (int j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    kernels::active().vdiv(row, sum, cols);
  }
}

struct AttnParams {
  const Array& wq;
  const Array& bq;
  const Array& wk;
  const Array& bk;
  const Array& wv;
  const Array& bv;
  const Array& wo;
  const Array& bo;
};

/// Standard multi-head attention, queries from x [N,W], keys/values from
/// kv_src. Reductions run in storage order; used where token order is fixed
/// (spatial self-attention, cross-attention).
Array multihead_attention(const Array& x, const Array& kv_src, const AttnParams& p, int heads) {
  const Array q = linear(x, p.wq, p.bq);
  const Array k = linear(kv_src, p.wk, p.bk);
  const Array v = linear(kv_src, p.wv, p.bv);
  const int n = q.extent(0), width = q.extent(1), nk = k.extent(0);
  const int d = width / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(d));

  Array out({n, width});
  std::vector<float> qh(static_cast<size_t>(n) * d), kht(static_cast<size_t>(d) * nk),
      vh(static_cast<size_t>(nk) * d), scores(static_cast<size_t>(n) * nk),
      oh(static_cast<size_t>(n) * d);
  for (int hd = 0; hd < heads; ++hd) {
    const int off = hd * d;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) qh[static_cast<size_t>(i) * d + j] = q(i, off + j);
    }
    for (int i = 0; i < nk; ++i) {
      for (int j = 0; j < d; ++j) {
        kht[static_cast<size_t>(j) * nk + i] = k(i, off + j);
        vh[static_cast<size_t>(i) * d + j] = v(i, off + j);
      }
    }
    kernels::active().matmul(qh.data(), kht.data(), scores.data(), n, d, nk);
    kernels::active().vscale(scores.data(), scale, n * nk);
    softmax_rows(scores.data(), n, nk);
    kernels::active().matmul(scores.data(), vh.data(), oh.data(), n, nk, d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) out(i, off + j) = oh[static_cast<size_t>(i) * d + j];
    }
  }
  return linear(out, p.wo, p.bo);
}

/// Temporal self-attention over x [M,W]. Attention runs per window (the
/// global scope is a single window spanning all frames) and window outputs
/// are blended with the plan's center-distance weights.
///
/// Reductions over the frame axis use a content-canonical frame order: the
/// window's frames are sorted lexicographically by (key row, value row)
/// before the softmax sum and the value matmul, so any permutation of input
/// frames yields the bitwise-identical permutation of outputs. Frames carry
/// no positional encoding, which is what makes that ordering well-defined.
Array temporal_attention(const Array& x, const AttnParams& p, int heads,
                         const AttentionMode& mode) {
  const Array q = linear(x, p.wq, p.bq);
  const Array k = linear(x, p.wk, p.bk);
  const Array v = linear(x, p.wv, p.bv);
  const int m = x.extent(0), width = x.extent(1);
  const int d = width / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(d));

  const bool global = mode.global_scope;
  const Window full{0, m, 0.0f};
  const int n_windows = global ? 1 : static_cast<int>(mode.plan.windows.size());

  Array out({m, width});
  std::vector<float> qh(static_cast<size_t>(m) * d), kh(static_cast<size_t>(m) * d),
      vh(static_cast<size_t>(m) * d), oh(static_cast<size_t>(m) * d);
  std::vector<float> kst, vs, scores, wout;
  std::vector<int> order;
  for (int hd = 0; hd < heads; ++hd) {
    const int off = hd * d;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < d; ++j) {
        qh[static_cast<size_t>(i) * d + j] = q(i, off + j);
        kh[static_cast<size_t>(i) * d + j] = k(i, off + j);
        vh[static_cast<size_t>(i) * d + j] = v(i, off + j);
      }
    }
    for (int wi = 0; wi < n_windows; ++wi) {
      const Window win = global ? full : mode.plan.windows[static_cast<size_t>(wi)];
      const int u = win.end - win.start;
      order.resize(static_cast<size_t>(u));
      for (int i = 0; i < u; ++i) order[static_cast<size_t>(i)] = win.start + i;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const float* ka = kh.data() + static_cast<size_t>(a) * d;
        const float* kb = kh.data() + static_cast<size_t>(b) * d;
        for (int j = 0; j < d; ++j) {
          if (ka[j] < kb[j]) return true;
          if (kb[j] < ka[j]) return false;
        }
        const float* va = vh.data() + static_cast<size_t>(a) * d;
        const float* vb = vh.data() + static_cast<size_t>(b) * d;
        for (int j = 0; j < d; ++j) {
          if (va[j] < vb[j]) return true;
          if (vb[j] < va[j]) return false;
        }
        return false;
      });
      kst.resize(static_cast<size_t>(d) * u);
      vs.resize(static_cast<size_t>(u) * d);
      for (int i = 0; i < u; ++i) {
        const float* kr = kh.data() + static_cast<size_t>(order[i]) * d;
        const float* vr = vh.data() + static_cast<size_t>(order[i]) * d;
        for (int j = 0; j < d; ++j) {
          kst[static_cast<size_t>(j) * u + i] = kr[j];
          vs[static_cast<size_t>(i) * d + j] = vr[j];
        }
      }
      scores.resize(static_cast<size_t>(u) * u);
      wout.resize(static_cast<size_t>(u) * d);
      kernels::active().matmul(qh.data() + static_cast<size_t>(win.start) * d, kst.data(),
                               scores.data(), u, d, u);
      kernels::active().vscale(scores.data(), scale, u * u);
      softmax_rows(scores.data(), u, u);
      kernels::active().matmul(scores.data(), vs.data(), wout.data(), u, u, d);

      if (global) {
        std::copy(wout.begin(), wout.end(), oh.begin());
      } else {
        for (int r = 0; r < u; ++r) {
          const int frame = win.start + r;
          const auto& entries = mode.plan.frame_weights[static_cast<size_t>(frame)];
          float weight = 0.0f;
          for (const auto& [j, wgt] : entries) {
            if (j == wi) {
              weight = wgt;
              break;
            }
          }
          float* dst = oh.data() + static_cast<size_t>(frame) * d;
          const float* src = wout.data() + static_cast<size_t>(r) * d;
          if (entries.front().first == wi) {
            for (int j = 0; j < d; ++j) dst[j] = weight * src[j];
          } else {
            for (int j = 0; j < d; ++j) dst[j] += weight * src[j];
          }
        }
      }
    }
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < d; ++j) out(i, off + j) = oh[static_cast<size_t>(i) * d + j];
    }
  }
  return linear(out, p.wo, p.bo);
}

Array mlp_forward(const Array& x, const Array& w1, const Array& b1, const Array& w2,
                  const Array& b2) {
  return linear(silu(linear(x, w1, b1)), w2, b2);
}

Array downsample2(const Array& h) {
  const int c = h.extent(0), m = h.extent(1), hh = h.extent(2), ww = h.extent(3);
  if (hh % 2 != 0 || ww % 2 != 0) {
    throw ShapeError("spatial extents must be even to downsample, got " + h.shape_str());
  }
  Array out({c, m, hh / 2, ww / 2});
  for (int ci = 0; ci < c; ++ci) {
    for (int mi = 0; mi < m; ++mi) {
      for (int y = 0; y < hh / 2; ++y) {
        for (int x = 0; x < ww / 2; ++x) {
          const float s = h(ci, mi, 2 * y, 2 * x) + h(ci, mi, 2 * y, 2 * x + 1) +
                          h(ci, mi, 2 * y + 1, 2 * x) + h(ci, mi, 2 * y + 1, 2 * x + 1);
          out(ci, mi, y, x) = s * 0.25f;
        }
      }
    }
  }
  return out;
}

Array upsample2(const Array& h) {
  const int c = h.extent(0), m = h.extent(1), hh = h.extent(2), ww = h.extent(3);
  Array out({c, m, hh * 2, ww * 2});
  for (int ci = 0; ci < c; ++ci) {
    for (int mi = 0; mi < m; ++mi) {
      for (int y = 0; y < 2 * hh; ++y) {
        for (int x = 0; x < 2 * ww; ++x) {
          out(ci, mi, y, x) = h(ci, mi, y / 2, x / 2);
        }
      }
    }
  }
  return out;
}

Array concat_channels(const Array& a, const Array& b) {
  Array out({a.extent(0) + b.extent(0), a.extent(1), a.extent(2), a.extent(3)});
  std::copy(a.data(), a.data() + a.size(), out.data());
  std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
  return out;
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

// ============================================================================
// Config / weights
// ============================================================================

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(v));
  };
  positive(latent_channels, "latent_channels");
  positive(hidden_channels, "hidden_channels");
  positive(num_blocks, "num_blocks");
  positive(levels, "levels");
  positive(heads, "heads");
  positive(head_dim, "head_dim");
  positive(text_dim, "text_dim");
  positive(text_tokens, "text_tokens");
  positive(time_dim, "time_dim");
  if (time_dim % 2 != 0) throw ConfigError("time_dim must be even, got " + std::to_string(time_dim));
}

ModelWeights ModelWeights::init(const ModelConfig& cfg) {
  cfg.validate();
  ModelWeights w;
  const auto specs = declare_params(cfg);
  w.params_.reserve(specs.size());
  uint64_t idx = 0;
  for (const auto& spec : specs) {
    Array value(spec.shape);
    switch (spec.kind) {
      case ParamKind::Weight: {
        Rng rng(cfg.weight_seed, idx);
        value = rng.normal(spec.shape);
        const float scale = 1.0f / std::sqrt(static_cast<float>(spec.fan_in));
        kernels::active().vscale(value.data(), scale, static_cast<int>(value.size()));
        break;
      }
      case ParamKind::Bias:
        break;  // zeros
      case ParamKind::Gain:
        std::fill(value.data(), value.data() + value.size(), 1.0f);
        break;
    }
    w.params_.push_back({spec.name, std::move(value)});
    ++idx;
  }
  return w;
}

const Array& ModelWeights::get(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.value;
  }
  throw ConfigError("unknown parameter '" + name + "'");
}

Array& ModelWeights::get(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p.value;
  }
  throw ConfigError("unknown parameter '" + name + "'");
}

size_t ModelWeights::total_floats() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ModelWeights::zero_all() {
  for (auto& p : params_) {
    std::fill(p.value.data(), p.value.data() + p.value.size(), 0.0f);
  }
}

// ============================================================================
// Prompt embedding
// ============================================================================

PromptEmbedding embed_prompt(const std::string& text, const ModelConfig& cfg) {
  std::istringstream iss(text);
  std::vector<std::string> tokens;
  std::string tok;
  while (iss >> tok) tokens.push_back(tok);
  if (tokens.empty()) throw InputError("prompt must contain at least one token");

  Array emb({cfg.text_tokens, cfg.text_dim});
  const int n = std::min<int>(static_cast<int>(tokens.size()), cfg.text_tokens);
  for (int pos = 0; pos < n; ++pos) {
    Rng rng(fnv1a64(tokens[static_cast<size_t>(pos)]), static_cast<uint64_t>(pos));
    for (int j = 0; j < cfg.text_dim; ++j) emb(pos, j) = rng.next_normal();
  }
  return PromptEmbedding{std::move(emb)};  // remaining rows stay zero (padding)
}

PromptEmbedding empty_prompt_embedding(const ModelConfig& cfg) {
  return PromptEmbedding{Array({cfg.text_tokens, cfg.text_dim})};
}

// ============================================================================
// Model
// ============================================================================

ToyVideoLdm::ToyVideoLdm(ModelConfig cfg) : cfg_(cfg), weights_(ModelWeights::init(cfg)) {}

ToyVideoLdm::ToyVideoLdm(ModelConfig cfg, ModelWeights weights)
    : cfg_(cfg), weights_(std::move(weights)) {
  cfg_.validate();
}

int ToyVideoLdm::num_video_blocks() const { return video_block_count(cfg_); }

int ToyVideoLdm::last_encoder_cross_layer() const {
  // down levels plus the middle level; everything after is the up path
  return cfg_.levels * cfg_.num_blocks - 1;
}

Array ToyVideoLdm::timestep_embedding(int t) const {
  const int half = cfg_.time_dim / 2;
  Array feats({1, cfg_.time_dim});
  const float log_base = std::log(10000.0f) / static_cast<float>(half);
  for (int i = 0; i < half; ++i) {
    const float freq = std::exp(-static_cast<float>(i) * log_base);
    const float angle = static_cast<float>(t) * freq;
    feats(0, i) = std::cos(angle);
    feats(0, i + half) = std::sin(angle);
  }
  const Array h = silu(linear(feats, weights_.get("time.w1"), weights_.get("time.b1")));
  return linear(h, weights_.get("time.w2"), weights_.get("time.b2"));
}

Array ToyVideoLdm::res_conv_block(int block, const Array& h, const Array& temb) const {
  const std::string p = "block" + std::to_string(block) + ".res";
  Array b = layer_norm(h, 0, weights_.get(p + ".norm1.gain"), weights_.get(p + ".norm1.bias"));
  b = silu(b);
  b = conv_spatial(b, weights_.get(p + ".conv1.w"));
  add_channel_bias(b, weights_.get(p + ".conv1.b").data());
  const Array tproj = linear(temb, weights_.get(p + ".time.w"), weights_.get(p + ".time.b"));
  add_channel_bias(b, tproj.data());
  b = layer_norm(b, 0, weights_.get(p + ".norm2.gain"), weights_.get(p + ".norm2.bias"));
  b = silu(b);
  b = conv_spatial(b, weights_.get(p + ".conv2.w"));
  add_channel_bias(b, weights_.get(p + ".conv2.b").data());
  return add_scaled(h, b, kResidualGain);
}

Array ToyVideoLdm::temporal_conv_block(int block, const Array& h) const {
  if (!cfg_.temporal_conv) return h;
  const std::string p = "block" + std::to_string(block) + ".tconv";
  Array b = layer_norm(h, 0, weights_.get(p + ".norm.gain"), weights_.get(p + ".norm.bias"));
  b = silu(b);
  b = conv_temporal(b, weights_.get(p + ".w"));
  add_channel_bias(b, weights_.get(p + ".b").data());
  return add_scaled(h, b, kResidualGain);
}

Array ToyVideoLdm::spatial_transformer(int block, const Array& h, int t, int layer,
                                       ConditionSource& cond) const {
  const std::string p = "block" + std::to_string(block) + ".st";
  const int c = h.extent(0), m = h.extent(1), hh = h.extent(2), ww = h.extent(3);
  const int sites = hh * ww;
  const AttnParams self_p{weights_.get(p + ".self.wq"), weights_.get(p + ".self.bq"),
                          weights_.get(p + ".self.wk"), weights_.get(p + ".self.bk"),
                          weights_.get(p + ".self.wv"), weights_.get(p + ".self.bv"),
                          weights_.get(p + ".self.wo"), weights_.get(p + ".self.bo")};
  const AttnParams cross_p{weights_.get(p + ".cross.wq"), weights_.get(p + ".cross.bq"),
                           weights_.get(p + ".cross.wk"), weights_.get(p + ".cross.bk"),
                           weights_.get(p + ".cross.wv"), weights_.get(p + ".cross.bv"),
                           weights_.get(p + ".cross.wo"), weights_.get(p + ".cross.bo")};
  const Array& proj_in_w = weights_.get(p + ".proj_in.w");
  const Array& proj_in_b = weights_.get(p + ".proj_in.b");
  const Array& ln1_g = weights_.get(p + ".ln1.gain");
  const Array& ln1_b = weights_.get(p + ".ln1.bias");
  const Array& ln2_g = weights_.get(p + ".ln2.gain");
  const Array& ln2_b = weights_.get(p + ".ln2.bias");
  const Array& ln3_g = weights_.get(p + ".ln3.gain");
  const Array& ln3_b = weights_.get(p + ".ln3.bias");
  const Array& mlp_w1 = weights_.get(p + ".mlp.w1");
  const Array& mlp_b1 = weights_.get(p + ".mlp.b1");
  const Array& mlp_w2 = weights_.get(p + ".mlp.w2");
  const Array& mlp_b2 = weights_.get(p + ".mlp.b2");
  const Array& proj_out_w = weights_.get(p + ".proj_out.w");
  const Array& proj_out_b = weights_.get(p + ".proj_out.b");

  Array out = h;
  parallel_for(m, [&](int mi) {
    Array x({sites, c});
    for (int ci = 0; ci < c; ++ci) {
      const float* src = h.data() + ci * h.stride(0) + static_cast<size_t>(mi) * sites;
      for (int s = 0; s < sites; ++s) x(s, ci) = src[s];
    }
    x = linear(x, proj_in_w, proj_in_b);
    {
      const Array normed = layer_norm(x, 1, ln1_g, ln1_b);
      x = add_scaled(x, multihead_attention(normed, normed, self_p, cfg_.heads), kResidualGain);
    }
    {
      const Array& ctokens = cond.resolve(t, layer, mi);
      x = add_scaled(x, multihead_attention(layer_norm(x, 1, ln2_g, ln2_b), ctokens, cross_p, cfg_.heads),
                     kResidualGain);
    }
    x = add_scaled(x, mlp_forward(layer_norm(x, 1, ln3_g, ln3_b), mlp_w1, mlp_b1, mlp_w2, mlp_b2),
                   kResidualGain);
    const Array y = linear(x, proj_out_w, proj_out_b);
    for (int ci = 0; ci < c; ++ci) {
      float* dst = out.data() + ci * out.stride(0) + static_cast<size_t>(mi) * sites;
      for (int s = 0; s < sites; ++s) dst[s] += kResidualGain * y(s, ci);
    }
  });
  return out;
}

Array ToyVideoLdm::temporal_transformer(int block, const Array& h, const AttentionMode& mode,
                                        PassCounters* counters) const {
  const std::string p = "block" + std::to_string(block) + ".tt";
  const int c = h.extent(0), m = h.extent(1), hh = h.extent(2), ww = h.extent(3);
  const int sites = hh * ww;
  if (!mode.global_scope && mode.plan.total != m) {
    throw ShapeError("window plan covers " + std::to_string(mode.plan.total) + " frames, video has " +
                     std::to_string(m));
  }
  if (counters) {
    long long pair_ops = 0;
    if (mode.global_scope) {
      pair_ops = static_cast<long long>(m) * m;
    } else {
      for (const Window& w : mode.plan.windows) {
        const long long u = w.end - w.start;
        pair_ops += u * u;
      }
    }
    counters->temporal_attn_invocations += 2;  // two attention layers below
    counters->temporal_attn_pair_ops += 2 * pair_ops;
  }
  const AttnParams a1{weights_.get(p + ".attn1.wq"), weights_.get(p + ".attn1.bq"),
                      weights_.get(p + ".attn1.wk"), weights_.get(p + ".attn1.bk"),
                      weights_.get(p + ".attn1.wv"), weights_.get(p + ".attn1.bv"),
                      weights_.get(p + ".attn1.wo"), weights_.get(p + ".attn1.bo")};
  const AttnParams a2{weights_.get(p + ".attn2.wq"), weights_.get(p + ".attn2.bq"),
                      weights_.get(p + ".attn2.wk"), weights_.get(p + ".attn2.bk"),
                      weights_.get(p + ".attn2.wv"), weights_.get(p + ".attn2.bv"),
                      weights_.get(p + ".attn2.wo"), weights_.get(p + ".attn2.bo")};
  const Array& proj_in_w = weights_.get(p + ".proj_in.w");
  const Array& proj_in_b = weights_.get(p + ".proj_in.b");
  const Array& ln1_g = weights_.get(p + ".ln1.gain");
  const Array& ln1_b = weights_.get(p + ".ln1.bias");
  const Array& ln2_g = weights_.get(p + ".ln2.gain");
  const Array& ln2_b = weights_.get(p + ".ln2.bias");
  const Array& ln3_g = weights_.get(p + ".ln3.gain");
  const Array& ln3_b = weights_.get(p + ".ln3.bias");
  const Array& mlp_w1 = weights_.get(p + ".mlp.w1");
  const Array& mlp_b1 = weights_.get(p + ".mlp.b1");
  const Array& mlp_w2 = weights_.get(p + ".mlp.w2");
  const Array& mlp_b2 = weights_.get(p + ".mlp.b2");
  const Array& proj_out_w = weights_.get(p + ".proj_out.w");
  const Array& proj_out_b = weights_.get(p + ".proj_out.b");

  Array out = h;
  parallel_for(sites, [&](int s) {
    Array x({m, c});
    for (int ci = 0; ci < c; ++ci) {
      const float* src = h.data() + ci * h.stride(0);
      for (int mi = 0; mi < m; ++mi) x(mi, ci) = src[static_cast<size_t>(mi) * sites + s];
    }
    x = linear(x, proj_in_w, proj_in_b);
    x = add_scaled(x, temporal_attention(layer_norm(x, 1, ln1_g, ln1_b), a1, cfg_.heads, mode),
                   kResidualGain);
    x = add_scaled(x, temporal_attention(layer_norm(x, 1, ln2_g, ln2_b), a2, cfg_.heads, mode),
                   kResidualGain);
    x = add_scaled(x, mlp_forward(layer_norm(x, 1, ln3_g, ln3_b), mlp_w1, mlp_b1, mlp_w2, mlp_b2),
                   kResidualGain);
    const Array y = linear(x, proj_out_w, proj_out_b);
    for (int ci = 0; ci < c; ++ci) {
      float* dst = out.data() + ci * out.stride(0);
      for (int mi = 0; mi < m; ++mi) {
        dst[static_cast<size_t>(mi) * sites + s] += kResidualGain * y(mi, ci);
      }
    }
  });
  return out;
}

Array ToyVideoLdm::video_block(int block, const Array& h, const Array& temb, int t, int layer,
                               ConditionSource& cond, const AttentionMode& mode,
                               PassCounters* counters) const {
  Array x = res_conv_block(block, h, temb);
  x = temporal_conv_block(block, x);
  x = spatial_transformer(block, x, t, layer, cond);
  x = temporal_transformer(block, x, mode, counters);
  return x;
}

Array ToyVideoLdm::spatial_block(int block, const Array& h, int t, ConditionSource& cond) const {
  const Array temb = timestep_embedding(t);
  return spatial_transformer(block, res_conv_block(block, h, temb), t, block, cond);
}

Array ToyVideoLdm::temporal_block(int block, const Array& h, const AttentionMode& mode,
                                  PassCounters* counters) const {
  return temporal_transformer(block, temporal_conv_block(block, h), mode, counters);
}

Array ToyVideoLdm::predict_noise(const Array& z, int t, ConditionSource& cond,
                                 const AttentionMode& mode, PassCounters* counters) const {
  if (z.ndim() != 4 || z.extent(0) != cfg_.latent_channels) {
    throw ShapeError("latent must be [" + std::to_string(cfg_.latent_channels) + ",M,H,W], got " +
                     z.shape_str());
  }
  const int m = z.extent(1);
  if (!mode.global_scope && mode.plan.total != m) {
    throw ShapeError("window plan covers " + std::to_string(mode.plan.total) + " frames, video has " +
                     std::to_string(m));
  }
  if (counters) {
    counters->unet_passes += 1;
    counters->acquire_frames(2 * m);  // working hidden state + block temporary
  }

  const Array temb = timestep_embedding(t);
  Array h = conv_spatial(z, weights_.get("conv_in.w"));
  add_channel_bias(h, weights_.get("conv_in.b").data());

  int block = 0;
  std::vector<Array> skips;
  for (int lev = 0; lev < cfg_.levels - 1; ++lev) {
    for (int b = 0; b < cfg_.num_blocks; ++b, ++block) {
      h = video_block(block, h, temb, t, block, cond, mode, counters);
    }
    skips.push_back(h);
    h = downsample2(h);
  }
  for (int b = 0; b < cfg_.num_blocks; ++b, ++block) {
    h = video_block(block, h, temb, t, block, cond, mode, counters);
  }
  for (int lev = cfg_.levels - 2; lev >= 0; --lev) {
    h = upsample2(h);
    const Array merged = concat_channels(skips.back(), h);
    skips.pop_back();
    const std::string sp = "skip" + std::to_string(lev);
    h = conv_spatial(merged, weights_.get(sp + ".w"));
    add_channel_bias(h, weights_.get(sp + ".b").data());
    for (int b = 0; b < cfg_.num_blocks; ++b, ++block) {
      h = video_block(block, h, temb, t, block, cond, mode, counters);
    }
  }

  h = layer_norm(h, 0, weights_.get("out.norm.gain"), weights_.get("out.norm.bias"));
  h = silu(h);
  Array eps = conv_spatial(h, weights_.get("out.w"));
  add_channel_bias(eps, weights_.get("out.b").data());

  if (counters) counters->release_frames(2 * m);
  if (!eps.all_finite()) {
    throw ModelError("model produced non-finite noise prediction at t=" + std::to_string(t));
  }
  return eps;
}

// ============================================================================
// Latent codec
// ============================================================================

Array encode_image(const Array& rgb) {
  if (rgb.ndim() != 3 || rgb.extent(0) != 3) {
    throw ShapeError("encode expects [3,H,W], got " + rgb.shape_str());
  }
  const int h = rgb.extent(1), w = rgb.extent(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("encode needs even spatial extents, got " + rgb.shape_str());
  }
  Array z({12, h / 2, w / 2});
  for (int c = 0; c < 3; ++c) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const int zc = c * 4 + dy * 2 + dx;
        for (int y = 0; y < h / 2; ++y) {
          for (int x = 0; x < w / 2; ++x) {
            z(zc, y, x) = rgb(c, 2 * y + dy, 2 * x + dx);
          }
        }
      }
    }
  }
  return z;
}

Array decode_image(const Array& latent) {
  if (latent.ndim() != 3 || latent.extent(0) != 12) {
    throw ShapeError("decode expects [12,H,W], got " + latent.shape_str());
  }
  const int h = latent.extent(1), w = latent.extent(2);
  Array rgb({3, h * 2, w * 2});
  for (int c = 0; c < 3; ++c) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const int zc = c * 4 + dy * 2 + dx;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            rgb(c, 2 * y + dy, 2 * x + dx) = latent(zc, y, x);
          }
        }
      }
    }
  }
  return rgb;
}

namespace {

Array codec_video(const Array& video, bool encode) {
  const int c_in = encode ? 3 : 12;
  if (video.ndim() != 4 || video.extent(0) != c_in) {
    throw ShapeError("video codec expects [" + std::to_string(c_in) + ",M,H,W], got " +
                     video.shape_str());
  }
  const int m = video.extent(1), h = video.extent(2), w = video.extent(3);
  Array frame({c_in, h, w});
  Array out;
  for (int mi = 0; mi < m; ++mi) {
    for (int ci = 0; ci < c_in; ++ci) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) frame(ci, y, x) = video(ci, mi, y, x);
      }
    }
    const Array mapped = encode ? encode_image(frame) : decode_image(frame);
    if (mi == 0) out = Array({mapped.extent(0), m, mapped.extent(1), mapped.extent(2)});
    for (int ci = 0; ci < mapped.extent(0); ++ci) {
      for (int y = 0; y < mapped.extent(1); ++y) {
        for (int x = 0; x < mapped.extent(2); ++x) out(ci, mi, y, x) = mapped(ci, y, x);
      }
    }
  }
  return out;
}

}  // namespace

Array encode_video(const Array& rgb) { return codec_video(rgb, true); }
Array decode_video(const Array& latent) { return codec_video(latent, false); }

// ============================================================================
// Weight file
// ============================================================================

void save_weights(const ToyVideoLdm& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  const ModelConfig& cfg = model.config();
  os.write("FNW1", 4);
  binio::write_u32(os, static_cast<uint32_t>(cfg.latent_channels));
  binio::write_u32(os, static_cast<uint32_t>(cfg.hidden_channels));
  binio::write_u32(os, static_cast<uint32_t>(cfg.num_blocks));
  binio::write_u32(os, static_cast<uint32_t>(cfg.levels));
  binio::write_u32(os, static_cast<uint32_t>(cfg.heads));
  binio::write_u32(os, static_cast<uint32_t>(cfg.head_dim));
  binio::write_u32(os, static_cast<uint32_t>(cfg.text_dim));
  binio::write_u32(os, static_cast<uint32_t>(cfg.text_tokens));
  binio::write_u32(os, static_cast<uint32_t>(cfg.time_dim));
  binio::write_u32(os, cfg.temporal_conv ? 1u : 0u);
  binio::write_u64(os, cfg.weight_seed);
  binio::write_u64(os, model.weights().total_floats());
  for (const Param& p : model.weights().params()) {
    binio::write_f32(os, p.value.data(), p.value.size());
  }
  if (!os) throw FormatError("write to '" + path + "' failed");
}

ToyVideoLdm load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path + "'");
  const std::string what = "weights file '" + path + "'";
  size_t offset = 0;
  char magic[4];
  binio::read_exact(is, magic, 4, offset, what);
  offset += 4;
  if (std::string(magic, 4) != "FNW1") {
    throw FormatError(what + ": bad magic at byte 0 (expected FNW1)");
  }
  ModelConfig cfg;
  cfg.latent_channels = static_cast<int>(binio::read_u32(is, offset, what));
  cfg.hidden_channels = static_cast<int>(binio::read_u32(is, offset, what));
  cfg.num_blocks = static_cast<int>(binio::read_u32(is, offset, what));
  cfg.levels = static_cast<int>(binio::read_u32(is, offset, what));
  cfg.heads = static_cast<int>(binio::read_u32(is, offset, what));
  cfg.head_dim = static_cast<int>(binio::read_u32(is, offset, what));
  cfg.text_dim = static_cast<int>(binio::read_u32(is, offset, what));
  cfg.text_tokens = static_cast<int>(binio::read_u32(is, offset, what));
  cfg.time_dim = static_cast<int>(binio::read_u32(is, offset, what));
  cfg.temporal_conv = binio::read_u32(is, offset, what) != 0;
  cfg.weight_seed = binio::read_u64(is, offset, what);
  cfg.validate();

  const uint64_t declared = binio::read_u64(is, offset, what);
  ModelWeights weights = ModelWeights::init(cfg);
  if (declared != weights.total_floats()) {
    throw FormatError(what + ": parameter count " + std::to_string(declared) +
                      " does not match config (" + std::to_string(weights.total_floats()) + ")");
  }
  for (Param& p : weights.params()) {
    binio::read_f32(is, p.value.data(), p.value.size(), offset, what);
  }
  return ToyVideoLdm(cfg, std::move(weights));
}

}  // namespace freenoise
