#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tsfx/attention.hpp"
#include "tsfx/nn.hpp"
#include "tsfx/ops.hpp"

namespace tsfx::nn {

enum class BlockKind { Temporal, CrossSectional };

struct ModelConfig {
  std::string block_string = "TCTC";  // stack order over {T, C}
  std::size_t d_model = 64;
  std::size_t heads = 8;
  std::size_t ffn_dim = 256;
  double dropout = 0.1;
  attn::AttentionMode attention_mode = attn::AttentionMode::Full;
  double sparsity_K = 0.1;
  bool causal_temporal = true;
  std::size_t deterministic_lag = 1;  // sub-diagonal pinned by deterministic_sparse
  std::string readout = "last";       // "last" or "mean" over the window
  // Train on every window position (valid under the causal mask); one
  // window then supervises T_win predictions instead of one.
  bool seq_supervision = true;

  void validate() const {
    if (block_string.empty()) throw ParameterError("block_string must be non-empty");
    for (char c : block_string)
      if (c != 'T' && c != 'C')
        throw ParameterError("block_string may only contain T and C, got '" + block_string + "'");
    if (d_model == 0 || heads == 0 || d_model % heads != 0)
      throw ParameterError("d_model must be a positive multiple of heads");
    if (attention_mode == attn::AttentionMode::MaxSparse &&
        (sparsity_K <= 0.0 || sparsity_K >= 1.0))
      throw ParameterError("sparsity_K must lie in (0, 1) for max_sparse");
    if (readout != "last" && readout != "mean")
      throw ParameterError("readout must be 'last' or 'mean'");
  }
};

// Everything the training loop needs from a model.
class ForecastModel {
 public:
  virtual ~ForecastModel() = default;
  // x: (B, T_win, N, F) -> predictions (B, N)
  virtual Tensor forward(const Tensor& x, bool training, std::uint64_t seed) = 0;
  virtual std::vector<Tensor*> parameters() = 0;
  // Non-parameter state that belongs in checkpoints (frozen masks).
  virtual std::vector<Tensor> extra_state() const { return {}; }
  virtual void set_extra_state(const std::vector<Tensor>& s) { (void)s; }
  // Causal models can emit one prediction per window position and train on
  // all of them; forecasting still reads the last position.
  virtual bool sequence_supervision() const { return false; }
  virtual Tensor forward_seq(const Tensor& x, bool training, std::uint64_t seed) {
    (void)training;
    (void)seed;
    throw ContractError("model has no per-position output head");
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for (Tensor* t : parameters()) n += t->numel();
    return n;
  }
};

// One multi-head self-attention sublayer with an optional dynamic
// sparsifier. In max_sparse mode each training pass recomputes the mask
// and stores the combined bias; evaluation reuses the stored bias so the
// mask is frozen at its final training state.
struct AttentionLayer {
  Linear wq, wk, wv, wo;
  std::size_t heads = 1;
  double K_thr = 0.1;
  bool dynamic = false;
  Tensor base_bias;  // (L, L)
  std::optional<Tensor> frozen_bias;  // (H, L, L)
  Tensor last_pbar;  // most recent batch-averaged first-pass probabilities
  Tensor last_mask;  // most recent sparsity mask

  AttentionLayer() = default;
  AttentionLayer(std::size_t d_model, std::size_t n_heads, Tensor bias, bool dyn, double K,
                 Rng& rng)
      : wq(d_model, d_model, rng),
        wk(d_model, d_model, rng),
        wv(d_model, d_model, rng),
        wo(d_model, d_model, rng),
        heads(n_heads),
        K_thr(K),
        dynamic(dyn),
        base_bias(std::move(bias)) {}

  // x: (R, L, d); avg_probs (optional out): (H, L, L) batch mean.
  Tensor forward(const Tensor& x, bool training, Tensor* avg_probs) {
    std::size_t R = x.shape()[0], L = x.shape()[1], d = x.shape()[2];
    std::size_t dh = d / heads;
    auto split = [&](const Tensor& t) {
      if (heads == 1) return t;
      return reshape(permute(reshape(t, {R, L, heads, dh}), {0, 2, 1, 3}), {R * heads, L, dh});
    };
    Tensor q = split(wq.apply(x));
    Tensor k = split(wk.apply(x));
    Tensor v = split(wv.apply(x));

    Tensor out, probs;
    if (dynamic && training) {
      attn::SparseAttentionResult res = attn::sparse_attention(q, k, v, base_bias, K_thr, heads);
      frozen_bias = res.combined_bias;
      last_pbar = res.pbar;
      last_mask = res.decision.mask;
      out = std::move(res.output);
      probs = std::move(res.probs);
    } else if (dynamic && frozen_bias) {
      attn::AttentionResult res = attn::attention_probs(q, k, v, *frozen_bias, heads);
      out = std::move(res.output);
      probs = std::move(res.probs);
    } else if (dynamic) {
      // never trained: fall back to a dynamic pass
      attn::SparseAttentionResult res = attn::sparse_attention(q, k, v, base_bias, K_thr, heads);
      out = std::move(res.output);
      probs = std::move(res.probs);
    } else {
      attn::AttentionResult res = attn::attention_probs(q, k, v, base_bias, heads);
      out = std::move(res.output);
      probs = std::move(res.probs);
    }
    if (avg_probs) *avg_probs = attn::batch_mean_probs(probs.detached(), heads);

    Tensor merged =
        heads == 1 ? out
                   : reshape(permute(reshape(out, {R, heads, L, dh}), {0, 2, 1, 3}), {R, L, d});
    return wo.apply(merged);
  }

  void collect(std::vector<Tensor*>& ps) {
    wq.collect(ps);
    wk.collect(ps);
    wv.collect(ps);
    wo.collect(ps);
  }
};

// Attention sublayer + feed-forward sublayer, post-norm residual layout.
struct Block {
  BlockKind kind = BlockKind::Temporal;
  AttentionLayer attn_layer;
  Linear ff1, ff2;
  Tensor ln1_g, ln1_b, ln2_g, ln2_b;
  double dropout_p = 0.1;

  // x: (B, T, N, d) -> same shape.
  Tensor forward(const Tensor& x, bool training, std::uint64_t seed, Tensor* avg_probs) {
    std::size_t B = x.shape()[0], T = x.shape()[1], N = x.shape()[2], d = x.shape()[3];
    Tensor xr = kind == BlockKind::Temporal
                    ? reshape(permute(x, {0, 2, 1, 3}), {B * N, T, d})
                    : reshape(x, {B * T, N, d});
    Tensor a = attn_layer.forward(xr, training, avg_probs);
    a = dropout(a, dropout_p, training, derive_seed(seed, 1));
    Tensor h1 = layer_norm(add(xr, a), ln1_g, ln1_b);
    Tensor f = ff2.apply(gelu(ff1.apply(h1)));
    f = dropout(f, dropout_p, training, derive_seed(seed, 2));
    Tensor h2 = layer_norm(add(h1, f), ln2_g, ln2_b);
    return kind == BlockKind::Temporal ? permute(reshape(h2, {B, N, T, d}), {0, 2, 1, 3})
                                       : reshape(h2, {B, T, N, d});
  }

  void collect(std::vector<Tensor*>& ps) {
    attn_layer.collect(ps);
    ff1.collect(ps);
    ff2.collect(ps);
    ps.push_back(&ln1_g);
    ps.push_back(&ln1_b);
    ps.push_back(&ln2_g);
    ps.push_back(&ln2_b);
  }
};

// Two-way attention forecaster: project features, add time and series
// positional embeddings, run the block stack in block_string order, read
// out the last window step per series through LayerNorm -> GELU -> Linear.
class TransformerModel : public ForecastModel {
 public:
  ModelConfig cfg;
  std::size_t T_win = 0, N = 0, F = 0;
  Linear input_proj;
  Tensor time_pos, series_pos;
  std::vector<Block> blocks;
  Tensor head_ln_g, head_ln_b;
  Linear head_out;

  TransformerModel(ModelConfig config, std::size_t t_win, std::size_t n_series,
                   std::size_t n_features, std::uint64_t seed)
      : cfg(std::move(config)), T_win(t_win), N(n_series), F(n_features) {
    cfg.validate();
    Rng rng(derive_seed(seed, 0xA11));
    input_proj = Linear(F, cfg.d_model, rng);
    time_pos = Tensor::randn({T_win, cfg.d_model}, rng, 1.0, true);
    series_pos = Tensor::randn({N, cfg.d_model}, rng, 1.0, true);
    for (char c : cfg.block_string) {
      Block b;
      b.kind = c == 'T' ? BlockKind::Temporal : BlockKind::CrossSectional;
      std::size_t L = b.kind == BlockKind::Temporal ? T_win : N;
      Tensor bias;
      if (b.kind == BlockKind::Temporal) {
        if (cfg.attention_mode == attn::AttentionMode::DeterministicSparse)
          bias = attn::subdiagonal_bias(T_win, cfg.deterministic_lag).b;
        else if (cfg.causal_temporal)
          bias = attn::causal_bias(L).b;
        else
          bias = attn::no_bias(L).b;
      } else {
        bias = attn::no_bias(L).b;
      }
      bool dynamic = cfg.attention_mode == attn::AttentionMode::MaxSparse;
      b.attn_layer =
          AttentionLayer(cfg.d_model, cfg.heads, std::move(bias), dynamic, cfg.sparsity_K, rng);
      b.ff1 = Linear(cfg.d_model, cfg.ffn_dim, rng);
      b.ff2 = Linear(cfg.ffn_dim, cfg.d_model, rng);
      b.ln1_g = Tensor::ones({cfg.d_model}, true);
      b.ln1_b = Tensor::zeros({cfg.d_model}, true);
      b.ln2_g = Tensor::ones({cfg.d_model}, true);
      b.ln2_b = Tensor::zeros({cfg.d_model}, true);
      b.dropout_p = cfg.dropout;
      blocks.push_back(std::move(b));
    }
    head_ln_g = Tensor::ones({cfg.d_model}, true);
    head_ln_b = Tensor::zeros({cfg.d_model}, true);
    head_out = Linear(cfg.d_model, 1, rng);
  }

  Tensor forward(const Tensor& x, bool training, std::uint64_t seed) override {
    return forward_capture(x, training, seed, nullptr);
  }

  bool sequence_supervision() const override {
    return cfg.seq_supervision && cfg.causal_temporal;
  }

  // Predictions at every window position: (B, T_win, N).
  Tensor forward_seq(const Tensor& x, bool training, std::uint64_t seed) override {
    Tensor h = encode(x, training, seed, nullptr);
    std::size_t B = x.shape()[0];
    Tensor r = reshape(h, {B * T_win * N, cfg.d_model});
    r = gelu(layer_norm(r, head_ln_g, head_ln_b));
    return reshape(head_out.apply(r), {B, T_win, N});
  }

  // capture, when non-null, receives one (H, L, L) batch-mean probability
  // tensor per attention layer in stack order.
  Tensor forward_capture(const Tensor& x, bool training, std::uint64_t seed,
                         std::vector<Tensor>* capture) {
    Tensor h = encode(x, training, seed, capture);
    std::size_t B = x.shape()[0];
    Tensor r;
    if (cfg.readout == "last")
      r = reshape(slice(h, 1, T_win - 1, 1), {B * N, cfg.d_model});
    else
      r = reshape(mean_axis0(permute(h, {1, 0, 2, 3})), {B * N, cfg.d_model});
    r = gelu(layer_norm(r, head_ln_g, head_ln_b));
    return reshape(head_out.apply(r), {B, N});
  }

  // Block-stack representation: (B, T_win, N, d_model).
  Tensor encode(const Tensor& x, bool training, std::uint64_t seed,
                std::vector<Tensor>* capture) {
    if (x.rank() != 4 || x.shape()[1] != T_win || x.shape()[2] != N || x.shape()[3] != F)
      throw ShapeError("transformer forward expects (B, " + std::to_string(T_win) + ", " +
                       std::to_string(N) + ", " + std::to_string(F) + "), got " +
                       shape_str(x.shape()));
    Tensor h = input_proj.apply(x);
    h = add(h, reshape(time_pos, {1, T_win, 1, cfg.d_model}));
    h = add(h, reshape(series_pos, {1, 1, N, cfg.d_model}));
    if (capture) capture->clear();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      Tensor probs;
      h = blocks[i].forward(h, training, derive_seed(seed, 100 + i), capture ? &probs : nullptr);
      if (capture) capture->push_back(std::move(probs));
    }
    return h;
  }

  std::vector<Tensor*> parameters() override {
    std::vector<Tensor*> ps;
    input_proj.collect(ps);
    ps.push_back(&time_pos);
    ps.push_back(&series_pos);
    for (Block& b : blocks) b.collect(ps);
    ps.push_back(&head_ln_g);
    ps.push_back(&head_ln_b);
    head_out.collect(ps);
    return ps;
  }

  std::vector<Tensor> extra_state() const override {
    std::vector<Tensor> s;
    for (const Block& b : blocks)
      s.push_back(b.attn_layer.frozen_bias ? *b.attn_layer.frozen_bias : Tensor::zeros({1}));
    return s;
  }

  void set_extra_state(const std::vector<Tensor>& s) override {
    for (std::size_t i = 0; i < blocks.size() && i < s.size(); ++i) {
      if (s[i].numel() > 1)
        blocks[i].attn_layer.frozen_bias = s[i];
      else
        blocks[i].attn_layer.frozen_bias.reset();
    }
  }
};

// The flattened four-layer MLP baseline: T_win*N*F -> 512 x4 -> N, GELU
// activations and dropout between layers.
class MlpModel : public ForecastModel {
 public:
  std::size_t T_win = 0, N = 0, F = 0;
  std::vector<Linear> layers;
  double dropout_p = 0.1;

  MlpModel(std::size_t t_win, std::size_t n_series, std::size_t n_features, std::uint64_t seed,
           std::size_t width = 512)
      : T_win(t_win), N(n_series), F(n_features) {
    Rng rng(derive_seed(seed, 0xB17));
    std::size_t in = T_win * N * F;
    layers.emplace_back(in, width, rng);
    layers.emplace_back(width, width, rng);
    layers.emplace_back(width, width, rng);
    layers.emplace_back(width, width, rng);
    layers.emplace_back(width, N, rng);
  }

  Tensor forward(const Tensor& x, bool training, std::uint64_t seed) override {
    std::size_t B = x.shape()[0];
    Tensor h = reshape(x, {B, T_win * N * F});
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
      h = gelu(layers[i].apply(h));
      h = dropout(h, dropout_p, training, derive_seed(seed, i + 1));
    }
    return layers.back().apply(h);
  }

  std::vector<Tensor*> parameters() override {
    std::vector<Tensor*> ps;
    for (Linear& l : layers) l.collect(ps);
    return ps;
  }
};

inline std::unique_ptr<MlpModel> build_mlp(std::size_t T_win, std::size_t N, std::size_t F,
                                           std::uint64_t seed) {
  return std::make_unique<MlpModel>(T_win, N, F, seed);
}

}  // namespace tsfx::nn
