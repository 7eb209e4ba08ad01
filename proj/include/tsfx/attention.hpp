#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tsfx/ops.hpp"
#include "tsfx/tensor.hpp"

namespace tsfx::attn {

enum class AttentionMode { Full, MaxSparse, DeterministicSparse };

inline std::string to_string(AttentionMode m) {
  switch (m) {
    case AttentionMode::Full: return "full";
    case AttentionMode::MaxSparse: return "max_sparse";
    case AttentionMode::DeterministicSparse: return "deterministic_sparse";
  }
  throw ParameterError("unknown attention mode");
}

inline AttentionMode attention_mode_from_string(const std::string& s) {
  if (s == "full") return AttentionMode::Full;
  if (s == "max_sparse") return AttentionMode::MaxSparse;
  if (s == "deterministic_sparse") return AttentionMode::DeterministicSparse;
  throw ParameterError("unknown attention mode '" + s + "'");
}

enum class BiasKind { None, Causal, Subdiagonal };

// Additive {0, -inf} attention bias over (query, key).
struct AttentionBias {
  Tensor b;  // (L, L)
  BiasKind kind = BiasKind::None;
  std::size_t lag = 0;
};

inline AttentionBias no_bias(std::size_t L) {
  return {Tensor::zeros({L, L}), BiasKind::None, 0};
}

inline AttentionBias causal_bias(std::size_t L) {
  std::vector<double> b(L * L, 0.0);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = i + 1; j < L; ++j) b[i * L + j] = kMaskedBias;
  return {Tensor({L, L}, std::move(b)), BiasKind::Causal, 0};
}

// Oracle mask keeping only the lag-th sub-diagonal; rows i < lag keep the
// self position so no row is fully degenerate.
inline AttentionBias subdiagonal_bias(std::size_t T_win, std::size_t lag) {
  if (lag < 1 || lag >= T_win)
    throw ParameterError("subdiagonal lag " + std::to_string(lag) + " outside [1, " +
                         std::to_string(T_win) + ")");
  std::vector<double> b(T_win * T_win, kMaskedBias);
  for (std::size_t i = 0; i < T_win; ++i) {
    if (i >= lag)
      b[i * T_win + (i - lag)] = 0.0;
    else
      b[i * T_win + i] = 0.0;
  }
  return {Tensor({T_win, T_win}, std::move(b)), BiasKind::Subdiagonal, lag};
}

struct AttentionResult {
  Tensor output;  // (R*H, L, dh)
  Tensor probs;   // (R*H, L, L)
};

// Scaled dot-product attention. q/k/v are head-split (R*H, L, dh) with the
// head index innermost in the leading axis. The bias is (L, L), shared by
// every head, or (H, L, L) with one slice per head.
inline AttentionResult attention_probs(const Tensor& q, const Tensor& k, const Tensor& v,
                                       const Tensor& bias, std::size_t heads = 1) {
  if (q.rank() != 3 || k.rank() != 3 || v.rank() != 3)
    throw ShapeError("attention_probs expects head-split rank-3 q/k/v");
  std::size_t dh = q.shape()[2];
  if (dh == 0) throw ShapeError("attention head dimension must be positive");
  Tensor logits = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor probs;
  if (bias.rank() == 3) {
    std::size_t H = bias.shape()[0];
    std::size_t L = logits.shape()[1];
    std::size_t R = logits.shape()[0] / H;
    Tensor grouped = reshape(logits, {R, H, L, logits.shape()[2]});
    probs = reshape(masked_softmax(grouped, bias), logits.shape());
  } else {
    probs = masked_softmax(logits, bias);
  }
  (void)heads;
  return {matmul(probs, v), probs};
}

// Mean over the batch: (R*H, L, L) -> (H, L, L), head index innermost in
// the leading axis.
inline Tensor batch_mean_probs(const Tensor& probs, std::size_t heads) {
  if (probs.rank() != 3 || probs.shape()[0] % heads != 0)
    throw ShapeError("batch_mean_probs expects (R*heads, L, L)");
  std::size_t R = probs.shape()[0] / heads;
  std::size_t L = probs.shape()[1], L2 = probs.shape()[2];
  return mean_axis0(reshape(probs, {R, heads, L, L2}));
}

// Row-thresholding decision of the dynamic sparsifier.
struct SparsityDecision {
  Tensor mask;     // same shape as pbar, entries in {0, 1}
  Tensor row_max;  // per (head, query) row maximum M
  double threshold_K = 0.0;
};

// Keeps entries >= K * (row max); exact zeros (base-masked positions)
// never survive, and the row argmax always does. Rows that are entirely
// zero (fully masked) produce an all-zero mask row.
inline SparsityDecision max_threshold_mask(const Tensor& pbar, double K) {
  if (K <= 0.0 || K >= 1.0)
    throw ParameterError("sparsity threshold K = " + std::to_string(K) + " outside (0, 1)");
  if (pbar.rank() < 1) throw ShapeError("max_threshold_mask needs rank >= 1");
  std::size_t L = pbar.shape().back();
  std::size_t rows = pbar.numel() / L;
  std::vector<double> mask(pbar.numel(), 0.0);
  std::vector<double> rowmax(rows, 0.0);
  const double* p = pbar.raw();
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = 0.0;
    for (std::size_t j = 0; j < L; ++j) mx = std::max(mx, p[r * L + j]);
    rowmax[r] = mx;
    if (mx <= 0.0) continue;  // degenerate row
    double cut = K * mx;
    for (std::size_t j = 0; j < L; ++j)
      if (p[r * L + j] > 0.0 && p[r * L + j] >= cut) mask[r * L + j] = 1.0;
  }
  Shape rshape(pbar.shape().begin(), pbar.shape().end() - 1);
  return {Tensor(pbar.shape(), std::move(mask)), Tensor(rshape, std::move(rowmax)), K};
}

// Auxiliary bias b': 0 where the mask keeps an entry, -inf where it does
// not; combined with the base bias it drives the re-softmax.
inline Tensor sparse_extra_bias(const SparsityDecision& d) {
  std::vector<double> b(d.mask.numel());
  const double* m = d.mask.raw();
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = m[i] > 0.5 ? 0.0 : kMaskedBias;
  return Tensor(d.mask.shape(), std::move(b));
}

struct SparseAttentionResult {
  Tensor output;         // (R*H, L, dh)
  Tensor probs;          // re-normalized probabilities after masking
  Tensor pbar;           // batch-averaged first-pass probabilities (H, L, L)
  SparsityDecision decision;
  Tensor combined_bias;  // base bias + b', (H, L, L); reusable as a frozen mask
};

// Dynamic max-attention sparsification: softmax, batch-average, threshold
// against the row maximum, then re-softmax of the same logits under the
// augmented bias. The first pass runs detached, so the thresholding
// decision is a constant for the gradient tape.
inline SparseAttentionResult sparse_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                              const Tensor& bias, double K_thr,
                                              std::size_t heads = 1) {
  std::size_t dh = q.shape()[2];
  Tensor logits = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor first = masked_softmax(logits.detached(), bias);
  Tensor pbar = batch_mean_probs(first, heads);
  SparsityDecision decision = max_threshold_mask(pbar, K_thr);
  Tensor extra = sparse_extra_bias(decision);
  // combined (H, L, L) bias: base broadcast over heads plus the mask bias
  Tensor combined = detail::broadcast_binary(
      extra, bias, [](double a, double b) { return a + b; }, "sparse_attention");

  std::size_t H = heads;
  std::size_t L = logits.shape()[1];
  std::size_t R = logits.shape()[0] / H;
  Tensor grouped = reshape(logits, {R, H, L, L});
  Tensor probs = reshape(masked_softmax(grouped, combined), logits.shape());
  return {matmul(probs, v), probs, pbar, std::move(decision), combined};
}

}  // namespace tsfx::attn
